//! First-order correction of the defeatured solution for internal features
//! by a point source at the feature barycenter.
//!
//! With Ĝ(x) = log|x − m_F| / 2π and the harmonic corrector g (g = −Ĝ on
//! Γ_D, ∂_n g = −∂_n Ĝ on Γ_N), the function G = Ĝ + g vanishes on Γ_D and
//! u₁ = u₀ + μ d̄ G with μ = 2π / (log(diam γ / 2) + 2π avg_γ g).
//!
//! Discretely, G takes the nodal values of Ĝ + g on the closed feature and
//! on Γ_D and is the discrete harmonic extension of those values in Ω. The
//! interpolant of Ĝ itself is not discretely harmonic, and its defect would
//! otherwise dominate |u − u₁| once the corrected error gets small.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector2;
use thiserror::Error;

use crate::boundary::{self, BoundaryError};
use crate::fem::{self, FEFunction, FemError, PoissonProblem, SolverOptions};
use crate::mesh::{Mesh, Point, REGION_FEATURE, TAG_DIRICHLET, TAG_GAMMA, TAG_NEUMANN};

#[derive(Debug, Error, PartialEq)]
pub enum CorrectionError {
    #[error("fundamental solution evaluated at its center")]
    Singular,
    #[error("feature barycenter is {dist} from the outer boundary, less than 10 h = {limit}")]
    TooCloseToBoundary { dist: f64, limit: f64 },
    #[error("coupling coefficient has a vanishing denominator")]
    VanishingDenominator,
    #[error("correction data belongs to a different mesh")]
    MeshMismatch,
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
}

/// log|x − m| / 2π.
pub fn fundamental_solution(x: Point, m: Point) -> Result<f64, CorrectionError> {
    let r = (x - m).norm();
    if r == 0.0 {
        return Err(CorrectionError::Singular);
    }
    Ok(r.ln() / (2.0 * PI))
}

/// ∇Ĝ(x) = (x − m) / (2π |x − m|²).
pub fn fundamental_gradient(x: Point, m: Point) -> Vector2<f64> {
    let d = x - m;
    d / (2.0 * PI * d.norm_squared())
}

/// Nodal values of Ĝ. The distance is clamped away from zero so that a node
/// sitting exactly at m_F (always inside the feature) gets a finite value.
pub fn fundamental_nodal(mesh: &Mesh, m: Point) -> Vec<f64> {
    mesh.nodes()
        .iter()
        .map(|&p| (p - m).norm().max(1e-12).ln() / (2.0 * PI))
        .collect()
}

/// Harmonic corrector with g = −Ĝ on the Dirichlet tag and ∂_n g = −∂_n Ĝ
/// on the Neumann tag of the outer boundary.
pub fn solve_corrector(
    mesh: &Arc<Mesh>,
    m: Point,
    options: &SolverOptions,
) -> Result<FEFunction, CorrectionError> {
    let outer: Vec<&str> = [TAG_DIRICHLET, TAG_NEUMANN]
        .into_iter()
        .filter(|t| !mesh.facets(t).is_empty())
        .collect();
    let dist = boundary::distance_to_tags(&m, mesh, &outer)?;
    let h = outer
        .iter()
        .flat_map(|t| mesh.facets(t))
        .map(|&e| mesh.edge_length(e))
        .fold(0.0, f64::max);
    if dist <= 10.0 * h {
        return Err(CorrectionError::TooCloseToBoundary {
            dist,
            limit: 10.0 * h,
        });
    }
    let mut problem = PoissonProblem::new(fem::constant(0.0))
        .dirichlet(TAG_DIRICHLET, fem::field(move |x| -(x - m).norm().ln() / (2.0 * PI)));
    if !mesh.facets(TAG_NEUMANN).is_empty() {
        problem = problem.neumann_flux(TAG_NEUMANN, Arc::new(move |x| -fundamental_gradient(x, m)));
    }
    Ok(fem::solve_poisson(mesh, &problem, options)?)
}

/// μ(γ) = 2π / (log(diam/2) − 2π ḡ), where ḡ is the average over γ of the
/// part Ĝ − G of the Green's function removed by the outer boundary.
pub fn mu_gamma(diam: f64, g_avg: f64) -> Result<f64, CorrectionError> {
    let denom = (diam / 2.0).ln() - 2.0 * PI * g_avg;
    if denom == 0.0 || !denom.is_finite() {
        return Err(CorrectionError::VanishingDenominator);
    }
    Ok(2.0 * PI / denom)
}

#[derive(Debug, Clone)]
pub struct CorrectionData {
    pub m_f: Point,
    /// Ĝ at the nodes of the defeatured mesh.
    pub g_hat: Vec<f64>,
    /// Harmonic corrector g.
    pub g: FEFunction,
    pub mu: f64,
    /// Average of the boundary error over γ.
    pub d_bar: f64,
    /// Nodal values of G.
    pub green: Vec<f64>,
}

impl CorrectionData {
    /// Assembles the correction for the feature of `u0`'s mesh, with
    /// Dirichlet data `g_gamma` on γ.
    pub fn assemble(
        u0: &FEFunction,
        g_gamma: impl Fn(Point) -> f64,
        options: &SolverOptions,
    ) -> Result<Self, CorrectionError> {
        let mesh = u0.mesh();
        let m_f = boundary::region_barycenter(mesh, REGION_FEATURE)?;
        let g = solve_corrector(mesh, m_f, options)?;
        let diam = boundary::tag_diameter(mesh, TAG_GAMMA)?;
        // ḡ in μ refers to −g here (G = Ĝ + g).
        let g_avg = -boundary::trace_of(&g, TAG_GAMMA)?.average();
        let mu = mu_gamma(diam, g_avg)?;
        let d_bar = boundary::boundary_error(g_gamma, u0, TAG_GAMMA)?.average();
        let g_hat = fundamental_nodal(mesh, m_f);
        let nodal: Vec<f64> = g_hat.iter().zip(g.values()).map(|(a, b)| a + b).collect();
        let green = harmonic_lift(mesh, &nodal, options)?;
        Ok(CorrectionData {
            m_f,
            g_hat,
            g,
            mu,
            d_bar,
            green,
        })
    }
}

/// Keeps `nodal` on the feature nodes (γ included) and on Γ_D and replaces
/// it by the discrete harmonic extension elsewhere, with natural conditions
/// on the remaining boundary.
pub fn harmonic_lift(mesh: &Arc<Mesh>, nodal: &[f64], options: &SolverOptions) -> Result<Vec<f64>, CorrectionError> {
    if nodal.len() != mesh.num_nodes() {
        return Err(CorrectionError::MeshMismatch);
    }
    let mut fixed = vec![None; mesh.num_nodes()];
    for v in mesh.region_nodes(mesh.region(REGION_FEATURE)) {
        fixed[v] = Some(nodal[v]);
    }
    for &[a, b] in mesh.facets(TAG_DIRICHLET) {
        fixed[a] = Some(nodal[a]);
        fixed[b] = Some(nodal[b]);
    }
    if fixed.iter().all(Option::is_none) {
        return Err(FemError::NoDirichlet.into());
    }
    let k = fem::assemble_stiffness_with(options.exec, mesh)?;
    let load = vec![0.0; mesh.num_nodes()];
    let (lift, _) = fem::solve_fixed(mesh, &k, &load, &fixed, options)?;
    Ok(lift.into_values())
}

/// u₁ = u₀ + μ d̄ G, nodewise on the defeatured mesh.
pub fn corrected_solution(u0: &FEFunction, data: &CorrectionData) -> Result<FEFunction, CorrectionError> {
    if !Arc::ptr_eq(u0.mesh(), data.g.mesh()) || data.green.len() != u0.values().len() {
        return Err(CorrectionError::MeshMismatch);
    }
    let scale = data.mu * data.d_bar;
    let values = u0
        .values()
        .iter()
        .zip(&data.green)
        .map(|(u, g)| u + scale * g)
        .collect();
    Ok(FEFunction::new(u0.mesh().clone(), values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundamental_solution_values() {
        let m = Point::new(0.3, -0.2);
        assert_eq!(fundamental_solution(m + Vector2::new(1.0, 0.0), m).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let v = fundamental_solution(m + Vector2::new(0.0, e), m).unwrap();
        assert!((v - 0.159155).abs() < 1e-6);
        let a = fundamental_solution(m + Vector2::new(0.6, 0.8), m).unwrap();
        let b = fundamental_solution(m + Vector2::new(-0.8, 0.6), m).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert_eq!(fundamental_solution(m, m), Err(CorrectionError::Singular));
    }

    #[test]
    fn mu_values() {
        // 2π / ln 0.05
        assert!((mu_gamma(0.1, 0.0).unwrap() + 2.097_378_782).abs() < 1e-8);
        assert_eq!(mu_gamma(2.0, 0.0), Err(CorrectionError::VanishingDenominator));
        let mus: Vec<f64> = [-0.1, 0.0, 0.1].iter().map(|&g| mu_gamma(0.1, g).unwrap()).collect();
        assert!(mus[0] < mus[1] && mus[1] < mus[2]);
    }
}
