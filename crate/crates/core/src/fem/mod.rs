//! P1 finite elements for mixed Dirichlet/Neumann Poisson problems.

pub mod quadrature;
pub mod sparse;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{edge_key, Mesh, Point};
use crate::par::{self, Execution};
use quadrature::{EDGE_GAUSS, TRIANGLE_3};
pub use sparse::{CgOutcome, CsrMatrix};

/// Scalar function of position shared between threads.
pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

pub fn field<F>(f: F) -> ScalarField
where
    F: Fn(Point) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Vector function of position, used for flux-type Neumann data.
pub type VectorField = Arc<dyn Fn(Point) -> nalgebra::Vector2<f64> + Send + Sync>;

pub fn constant(c: f64) -> ScalarField {
    Arc::new(move |_| c)
}

#[derive(Debug, Error, PartialEq)]
pub enum FemError {
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("boundary edge ({0}, {1}) carries no boundary condition")]
    UncoveredBoundaryEdge(usize, usize),
    #[error("problem has no Dirichlet boundary")]
    NoDirichlet,
    #[error("boundary condition refers to unknown facet tag {0:?}")]
    UnknownTag(String),
    #[error("CG stopped after {iterations} iterations at relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("flux Neumann edge ({0}, {1}) is not on the mesh boundary")]
    InteriorFluxEdge(usize, usize),
    #[error("non-finite nodal value at node {0}")]
    NonFinite(usize),
}

/// Source term and per-tag boundary data of one Poisson solve.
#[derive(Clone)]
pub struct PoissonProblem {
    pub source: ScalarField,
    pub dirichlet: BTreeMap<String, ScalarField>,
    pub neumann: BTreeMap<String, ScalarField>,
    /// Neumann data given as a flux q, imposing ∂_n u = q · n on the tag.
    pub neumann_flux: BTreeMap<String, VectorField>,
}

impl fmt::Debug for PoissonProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonProblem")
            .field("dirichlet", &self.dirichlet.keys().collect::<Vec<_>>())
            .field("neumann", &self.neumann.keys().collect::<Vec<_>>())
            .field("neumann_flux", &self.neumann_flux.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl PoissonProblem {
    pub fn new(source: ScalarField) -> Self {
        PoissonProblem {
            source,
            dirichlet: BTreeMap::new(),
            neumann: BTreeMap::new(),
            neumann_flux: BTreeMap::new(),
        }
    }

    pub fn dirichlet(mut self, tag: &str, g: ScalarField) -> Self {
        self.dirichlet.insert(tag.to_string(), g);
        self
    }

    pub fn neumann(mut self, tag: &str, g: ScalarField) -> Self {
        self.neumann.insert(tag.to_string(), g);
        self
    }

    pub fn neumann_flux(mut self, tag: &str, q: VectorField) -> Self {
        self.neumann_flux.insert(tag.to_string(), q);
        self
    }

    fn neumann_tags(&self) -> impl Iterator<Item = &String> {
        self.neumann.keys().chain(self.neumann_flux.keys())
    }
}

/// Piecewise-linear function given by its nodal values.
#[derive(Debug, Clone)]
pub struct FEFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl FEFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self, FemError> {
        if values.len() != mesh.num_nodes() {
            return Err(FemError::LengthMismatch {
                expected: mesh.num_nodes(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FemError::NonFinite(i));
        }
        Ok(FEFunction { mesh, values })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|&p| f(p)).collect();
        FEFunction { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Constant gradient on triangle `t`.
    pub fn gradient(&self, t: usize) -> nalgebra::Vector2<f64> {
        let tri = self.mesh.triangles()[t];
        let (grads, _) = p1_gradients(&self.mesh.triangle_points(t));
        (0..3).map(|k| grads[k] * self.values[tri[k]]).sum()
    }
}

/// Gradients of the three P1 basis functions and the triangle area.
pub(crate) fn p1_gradients(p: &[Point; 3]) -> ([nalgebra::Vector2<f64>; 3], f64) {
    let area2 = (p[1] - p[0]).perp(&(p[2] - p[0]));
    let g = |a: usize, b: usize| {
        let e = p[b] - p[a];
        nalgebra::Vector2::new(-e.y, e.x) / area2
    };
    ([g(1, 2), g(2, 0), g(0, 1)], 0.5 * area2)
}

/// Element stiffness matrix of a P1 triangle.
pub fn element_stiffness(p: &[Point; 3]) -> Option<[[f64; 3]; 3]> {
    let (g, area) = p1_gradients(p);
    if !(area > 0.0) {
        return None;
    }
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * g[i].dot(&g[j]);
        }
    }
    Some(k)
}

pub fn assemble_stiffness(mesh: &Mesh) -> Result<CsrMatrix, FemError> {
    assemble_stiffness_with(Execution::default(), mesh)
}

/// Element matrices are computed as a parallel map, then scattered in
/// triangle order.
pub fn assemble_stiffness_with(exec: Execution, mesh: &Mesh) -> Result<CsrMatrix, FemError> {
    let locals = par::map_range(exec, mesh.num_triangles(), |t| {
        element_stiffness(&mesh.triangle_points(t))
    });
    let mut triplets = Vec::with_capacity(9 * locals.len());
    for (t, (local, tri)) in locals.iter().zip(mesh.triangles()).enumerate() {
        let k = local.ok_or(FemError::DegenerateTriangle(t))?;
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], k[i][j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.num_nodes(), &triplets))
}

/// Load vector of the source term and the Neumann data.
fn assemble_load(exec: Execution, mesh: &Mesh, problem: &PoissonProblem) -> Result<Vec<f64>, FemError> {
    let locals = par::map_range(exec, mesh.num_triangles(), |t| {
        let p = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        let mut f = [0.0; 3];
        for &(l, w) in &TRIANGLE_3 {
            let x = Point::from(p[0].coords * l[0] + p[1].coords * l[1] + p[2].coords * l[2]);
            let s = (problem.source)(x) * w * area;
            for k in 0..3 {
                f[k] += s * l[k];
            }
        }
        f
    });
    let mut b = vec![0.0; mesh.num_nodes()];
    for (f, tri) in locals.iter().zip(mesh.triangles()) {
        for k in 0..3 {
            b[tri[k]] += f[k];
        }
    }
    let mut add_edge = |i: usize, j: usize, g: &dyn Fn(Point) -> f64| {
        let (a, c) = (mesh.nodes()[i], mesh.nodes()[j]);
        let len = (c - a).norm();
        for &(s, w) in &EDGE_GAUSS {
            let v = g(a + (c - a) * s) * w * len;
            b[i] += v * (1.0 - s);
            b[j] += v * s;
        }
    };
    for (tag, g) in &problem.neumann {
        for &[i, j] in mesh.facets(tag) {
            add_edge(i, j, g.as_ref());
        }
    }
    if !problem.neumann_flux.is_empty() {
        // Boundary edges are oriented with the domain on the left.
        let oriented: HashMap<(usize, usize), [usize; 2]> = mesh
            .boundary_edges()
            .into_iter()
            .map(|[a, b]| (edge_key(a, b), [a, b]))
            .collect();
        for (tag, q) in &problem.neumann_flux {
            for &[i, j] in mesh.facets(tag) {
                let [i, j] = oriented[&edge_key(i, j)];
                let t = mesh.nodes()[j] - mesh.nodes()[i];
                let normal = nalgebra::Vector2::new(t.y, -t.x) / t.norm();
                add_edge(i, j, &|x| q(x).dot(&normal));
            }
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual tolerance of CG.
    pub tol: f64,
    /// Iteration cap; `None` means 20·√(free dofs).
    pub max_iter: Option<usize>,
    pub exec: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: None,
            exec: Execution::default(),
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }

    pub fn iteration_cap(&self, dofs: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| (20.0 * (dofs as f64).sqrt()).ceil() as usize)
            .max(1)
    }
}

/// Nodal Dirichlet values. A node shared by several Dirichlet tags takes the
/// value of the first tag in name order; disagreeing data is reported.
fn dirichlet_values(mesh: &Mesh, problem: &PoissonProblem) -> Result<Vec<Option<f64>>, FemError> {
    let mut fixed: Vec<Option<f64>> = vec![None; mesh.num_nodes()];
    for (tag, g) in &problem.dirichlet {
        if !mesh.facet_tags().contains_key(tag) {
            return Err(FemError::UnknownTag(tag.clone()));
        }
        for &[a, b] in mesh.facets(tag) {
            for v in [a, b] {
                let value = g(mesh.nodes()[v]);
                match fixed[v] {
                    None => fixed[v] = Some(value),
                    Some(prev) => {
                        if (prev - value).abs() > 1e-8 * (1.0 + prev.abs()) {
                            log::warn!(
                                "incompatible Dirichlet data at node {v}: {prev} vs {value} on {tag:?}"
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(fixed)
}

fn check_coverage(mesh: &Mesh, problem: &PoissonProblem) -> Result<(), FemError> {
    for tag in problem.neumann_tags() {
        if !mesh.facet_tags().contains_key(tag) {
            return Err(FemError::UnknownTag(tag.clone()));
        }
    }
    let boundary: HashMap<(usize, usize), ()> = mesh
        .boundary_edges()
        .into_iter()
        .map(|[a, b]| (edge_key(a, b), ()))
        .collect();
    for tag in problem.neumann_flux.keys() {
        if let Some(&[a, b]) = mesh
            .facets(tag)
            .iter()
            .find(|&&[a, b]| !boundary.contains_key(&edge_key(a, b)))
        {
            return Err(FemError::InteriorFluxEdge(a, b));
        }
    }
    let mut covered: HashMap<(usize, usize), ()> = HashMap::new();
    for tag in problem.dirichlet.keys().chain(problem.neumann_tags()) {
        for &[a, b] in mesh.facets(tag) {
            covered.insert(edge_key(a, b), ());
        }
    }
    if let Some([a, b]) = mesh
        .boundary_edges()
        .into_iter()
        .find(|&[a, b]| !covered.contains_key(&edge_key(a, b)))
    {
        return Err(FemError::UncoveredBoundaryEdge(a, b));
    }
    Ok(())
}

pub fn solve_poisson(
    mesh: &Arc<Mesh>,
    problem: &PoissonProblem,
    options: &SolverOptions,
) -> Result<FEFunction, FemError> {
    solve_poisson_report(mesh, problem, options).map(|(u, _)| u)
}

/// Solves the problem and also returns the CG statistics.
pub fn solve_poisson_report(
    mesh: &Arc<Mesh>,
    problem: &PoissonProblem,
    options: &SolverOptions,
) -> Result<(FEFunction, CgOutcome), FemError> {
    check_coverage(mesh, problem)?;
    let fixed = dirichlet_values(mesh, problem)?;
    if fixed.iter().all(Option::is_none) {
        return Err(FemError::NoDirichlet);
    }
    let k = assemble_stiffness_with(options.exec, mesh)?;
    let load = assemble_load(options.exec, mesh, problem)?;
    solve_fixed(mesh, &k, &load, &fixed, options)
}

/// Solves K u = b at the free nodes, with `fixed[v]` prescribing the value of
/// node `v`.
pub(crate) fn solve_fixed(
    mesh: &Arc<Mesh>,
    k: &CsrMatrix,
    load: &[f64],
    fixed: &[Option<f64>],
    options: &SolverOptions,
) -> Result<(FEFunction, CgOutcome), FemError> {
    let mut free_index = vec![None; mesh.num_nodes()];
    let mut free = Vec::new();
    for (v, f) in fixed.iter().enumerate() {
        if f.is_none() {
            free_index[v] = Some(free.len());
            free.push(v);
        }
    }
    let mut values: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    let rhs: Vec<f64> = free
        .iter()
        .map(|&v| {
            load[v]
                - k.row(v)
                    .filter(|&(j, _)| fixed[j].is_some())
                    .map(|(j, a)| a * values[j])
                    .sum::<f64>()
        })
        .collect();
    let reduced = k.restrict(&free_index, free.len());
    let mut x = vec![0.0; free.len()];
    let cap = options.iteration_cap(free.len());
    let outcome = sparse::pcg(options.exec, &reduced, &rhs, &mut x, options.tol, cap);
    if !outcome.converged {
        return Err(FemError::NotConverged {
            iterations: outcome.iterations,
            residual: outcome.relative_residual,
        });
    }
    for (&v, xi) in free.iter().zip(x) {
        values[v] = xi;
    }
    Ok((FEFunction::new(mesh.clone(), values)?, outcome))
}

/// |u|_{H¹} over the whole mesh.
pub fn h1_seminorm(u: &FEFunction) -> f64 {
    let mesh = u.mesh();
    par::chunked_sum(Execution::default(), mesh.num_triangles(), |r| {
        r.map(|t| u.gradient(t).norm_squared() * mesh.triangle_area(t))
            .sum()
    })
    .sqrt()
}

/// |u − u_h|_{H¹} for a known exact gradient, by the three-point rule on
/// every triangle.
pub fn h1_seminorm_error(u_h: &FEFunction, grad: impl Fn(Point) -> nalgebra::Vector2<f64> + Sync) -> f64 {
    let mesh = u_h.mesh();
    par::chunked_sum(Execution::default(), mesh.num_triangles(), |r| {
        r.map(|t| {
            let p = mesh.triangle_points(t);
            let gh = u_h.gradient(t);
            let area = mesh.triangle_area(t);
            TRIANGLE_3
                .iter()
                .map(|(l, w)| {
                    let x = Point::from(p[0].coords * l[0] + p[1].coords * l[1] + p[2].coords * l[2]);
                    w * area * (gh - grad(x)).norm_squared()
                })
                .sum::<f64>()
        })
        .sum()
    })
    .sqrt()
}

/// |u − u₀|_{H¹(Ω)} with u on the exact-domain submesh and u₀ on the full
/// mesh; `parent_nodes[i]` is the full-mesh index of submesh node `i`.
pub fn defeaturing_error(
    u_exact: &FEFunction,
    u0: &FEFunction,
    parent_nodes: &[usize],
) -> Result<f64, FemError> {
    if parent_nodes.len() != u_exact.values().len() {
        return Err(FemError::LengthMismatch {
            expected: u_exact.values().len(),
            found: parent_nodes.len(),
        });
    }
    let values = u_exact
        .values()
        .iter()
        .zip(parent_nodes)
        .map(|(u, &p)| {
            u0.values().get(p).map(|v| u - v).ok_or(FemError::LengthMismatch {
                expected: p + 1,
                found: u0.values().len(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(h1_seminorm(&FEFunction::new(u_exact.mesh().clone(), values)?))
}
