use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use super::{ExperimentConfig, ExperimentError, ExperimentKind, ResultRow};
use crate::boundary::{self, BoundaryTrace};
use crate::correction::{self, CorrectionData};
use crate::estimators::{EstimatorReport, FeatureCase};
use crate::fem::{self, FEFunction, PoissonProblem, ScalarField, SolverOptions};
use crate::mesh::{
    generate_template_with, FeatureGeometry, FeatureShape, Mesh, MeshOptions, Point, REGION_FEATURE,
    TAG_DIRICHLET, TAG_GAMMA, TAG_GAMMA0, TAG_NEUMANN,
};
use crate::par::{self, Execution};

/// Smallest effectivity observed per feature family on the reference
/// configuration, rounded down. Runs below these values are regressions.
pub const ETA_MIN: [(FeatureCase, f64); 3] = [
    (FeatureCase::DirichletDirichlet, 1.1),
    (FeatureCase::DirichletNeumann, 1.4),
    (FeatureCase::Internal, 1.0),
];

pub fn eta_min(case: FeatureCase) -> f64 {
    ETA_MIN
        .iter()
        .find(|(c, _)| *c == case)
        .map(|(_, v)| *v)
        .unwrap_or(0.0)
}

/// One (shape, size, angle) point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub kind: ExperimentKind,
    pub case: FeatureCase,
    pub shape: FeatureShape,
    pub size: f64,
    pub alpha: Option<f64>,
}

impl Cell {
    fn label(&self) -> String {
        format!("{}/{}/size={}", self.kind.name(), self.shape, self.size)
    }
}

/// A result row with the estimator report it came from and a few mesh and
/// correction diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub row: ResultRow,
    pub report: EstimatorReport,
    /// Shortest edge of the defeatured mesh.
    pub min_edge_length: f64,
    /// μ·avg_γ(G), correction rows only.
    pub mu_green_avg: Option<f64>,
}

/// A sin(2π k₁ x) sin(2π k₂ y) with A = 12, k₁ = 2, k₂ = 1.
pub fn oscillatory_source() -> ScalarField {
    fem::field(|p| 12.0 * (4.0 * PI * p.x).sin() * (2.0 * PI * p.y).sin())
}

fn theta(p: Point, center: Point) -> f64 {
    (p.y - center.y).atan2(p.x - center.x)
}

fn case_of(config: &ExperimentConfig) -> FeatureCase {
    match config.experiment {
        ExperimentKind::DdShapes | ExperimentKind::DdAngleSweep => FeatureCase::DirichletDirichlet,
        ExperimentKind::DnShapes => FeatureCase::DirichletNeumann,
        ExperimentKind::InternalShapes | ExperimentKind::InternalCorrection => FeatureCase::Internal,
        ExperimentKind::Custom => config.case.unwrap_or(FeatureCase::Internal),
    }
}

/// Cells in emission order: shape, then size descending, then angle.
pub fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let case = case_of(config);
    let mut out = Vec::new();
    for &shape in &config.shapes {
        for &size in &config.sizes {
            if config.experiment == ExperimentKind::DdAngleSweep {
                for &alpha_deg in &config.alphas {
                    out.push(Cell {
                        kind: config.experiment,
                        case,
                        shape: FeatureShape::Triangle { alpha_deg },
                        size,
                        alpha: Some(alpha_deg),
                    });
                }
            } else {
                let alpha = match shape {
                    FeatureShape::Triangle { alpha_deg } => Some(alpha_deg),
                    _ => None,
                };
                out.push(Cell {
                    kind: config.experiment,
                    case,
                    shape,
                    size,
                    alpha,
                });
            }
        }
    }
    out
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<CellRecord>, ExperimentError> {
    run_experiment_with(Execution::default(), config)
}

/// Runs every cell of the sweep; cells are independent and evaluated under
/// `exec`, the records come back in [`cells`] order.
pub fn run_experiment_with(
    exec: Execution,
    config: &ExperimentConfig,
) -> Result<Vec<CellRecord>, ExperimentError> {
    config.validate()?;
    let cells = cells(config);
    let results = par::map_collect(exec, &cells, |cell| run_cell(exec, config, cell));
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    Ok(records)
}

struct Setup {
    geometry: FeatureGeometry,
    mesh: Arc<Mesh>,
    sub: Arc<Mesh>,
    parent_nodes: Vec<usize>,
}

fn build(config: &ExperimentConfig, cell: &Cell) -> Result<Setup, ExperimentError> {
    let label = cell.label();
    let mesh_err = |source| ExperimentError::Mesh {
        cell: label.clone(),
        source,
    };
    let geometry = match cell.case {
        FeatureCase::Internal => FeatureGeometry::internal(cell.shape, cell.size),
        FeatureCase::DirichletDirichlet => FeatureGeometry::boundary(cell.shape, cell.size),
        FeatureCase::DirichletNeumann => FeatureGeometry::boundary(cell.shape, cell.size).with_neumann_top(),
    };
    let mut options = MeshOptions {
        h: config.h,
        far_field: config.far_field,
        grading: config.grading,
        ..Default::default()
    };
    if cell.case == FeatureCase::Internal {
        // m_F can sit close to γ (outside F for the C and L shapes), where the
        // θ-parameterized data varies fastest.
        let m = geometry.anchor().map_err(&mesh_err)?;
        let to_gamma = geometry.outline(config.h * cell.size).map_err(&mesh_err)?.distance(&m);
        let mut near = (config.h * cell.size).min(to_gamma) / 4.0;
        if cell.kind == ExperimentKind::InternalCorrection {
            // Resolve Ĝ near the point source: edges of at most diam/8 there.
            near = near.min(cell.size / PI / 8.0);
        }
        options.point_refinement = Some((m, near));
    }
    let mut mesh = generate_template_with(&geometry, &options).map_err(&mesh_err)?;
    let project = geometry.boundary_projector().map_err(&mesh_err)?;
    for _ in 0..config.refinement_levels {
        mesh = mesh.refine_uniform_onto(TAG_GAMMA, &project).map_err(&mesh_err)?;
    }
    let sub = mesh.extract_exact_submesh().map_err(&mesh_err)?;
    Ok(Setup {
        geometry,
        mesh: Arc::new(mesh),
        sub: Arc::new(sub.mesh),
        parent_nodes: sub.parent_nodes,
    })
}

/// Exact and defeatured problems of a cell, plus the Dirichlet data on γ.
struct Problems {
    exact: PoissonProblem,
    defeatured: PoissonProblem,
    g_gamma: ScalarField,
}

fn problems(cell: &Cell, center: Point) -> Problems {
    let zero = fem::constant(0.0);
    match (cell.kind, cell.case) {
        (ExperimentKind::DdAngleSweep, _) => {
            let g = fem::field(|p| -(p.x * p.x + p.y * p.y) / 2.0);
            let f = oscillatory_source();
            Problems {
                exact: PoissonProblem::new(f.clone())
                    .dirichlet(TAG_DIRICHLET, g.clone())
                    .dirichlet(TAG_GAMMA, g.clone()),
                defeatured: PoissonProblem::new(f)
                    .dirichlet(TAG_DIRICHLET, g.clone())
                    .dirichlet(TAG_GAMMA0, g.clone()),
                g_gamma: g,
            }
        }
        (ExperimentKind::InternalCorrection, _) => {
            let g = fem::field(|p| p.x * p.x + p.y);
            let f = oscillatory_source();
            let one = fem::constant(1.0);
            Problems {
                exact: PoissonProblem::new(f.clone())
                    .dirichlet(TAG_DIRICHLET, one.clone())
                    .dirichlet(TAG_GAMMA, g.clone()),
                defeatured: PoissonProblem::new(f).dirichlet(TAG_DIRICHLET, one),
                g_gamma: g,
            }
        }
        (_, FeatureCase::DirichletDirichlet) => {
            let g = fem::field(move |p| theta(p, center).sin());
            let f = fem::constant(1.0);
            Problems {
                exact: PoissonProblem::new(f.clone())
                    .dirichlet(TAG_DIRICHLET, zero.clone())
                    .dirichlet(TAG_GAMMA, g.clone()),
                defeatured: PoissonProblem::new(f)
                    .dirichlet(TAG_DIRICHLET, zero.clone())
                    .dirichlet(TAG_GAMMA0, zero),
                g_gamma: g,
            }
        }
        (_, FeatureCase::DirichletNeumann) => {
            let g = fem::field(move |p| theta(p, center).cos());
            let f = fem::constant(1.0);
            Problems {
                exact: PoissonProblem::new(f.clone())
                    .dirichlet(TAG_DIRICHLET, zero.clone())
                    .neumann(TAG_NEUMANN, zero.clone())
                    .dirichlet(TAG_GAMMA, g.clone()),
                defeatured: PoissonProblem::new(f)
                    .dirichlet(TAG_DIRICHLET, zero.clone())
                    .neumann(TAG_NEUMANN, zero.clone())
                    .neumann(TAG_GAMMA0, zero),
                g_gamma: g,
            }
        }
        (_, FeatureCase::Internal) => {
            let g = fem::field(move |p| theta(p, center).cos() + 1.0);
            let f = fem::constant(1.0);
            Problems {
                exact: PoissonProblem::new(f.clone())
                    .dirichlet(TAG_DIRICHLET, zero.clone())
                    .dirichlet(TAG_GAMMA, g.clone()),
                defeatured: PoissonProblem::new(f).dirichlet(TAG_DIRICHLET, zero),
                g_gamma: g,
            }
        }
    }
}

/// Boundary error and true error of one defeatured solution.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Suffix of the shape column ("naive"/"corrected"), if any.
    pub variant: Option<&'static str>,
    pub d: BoundaryTrace,
    pub error: f64,
    /// μ·avg_γ(G), corrected outcomes only.
    pub mu_green_avg: Option<f64>,
}

/// Everything a cell computes before estimators are applied.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub outcomes: Vec<Outcome>,
    /// dist(m_F, Γ) for internal features.
    pub dist: Option<f64>,
    pub dof: usize,
    pub min_edge_length: f64,
}

/// Meshes and solves one cell. Correction cells yield a naive and a
/// corrected outcome.
pub fn solve_cell(
    exec: Execution,
    config: &ExperimentConfig,
    cell: &Cell,
) -> Result<CellSolution, ExperimentError> {
    let label = cell.label();
    let fem_err = |source| ExperimentError::Fem {
        cell: label.clone(),
        source,
    };
    let bnd_err = |source| ExperimentError::Boundary {
        cell: label.clone(),
        source,
    };
    let cor_err = |source| ExperimentError::Correction {
        cell: label.clone(),
        source,
    };

    let setup = build(config, cell)?;
    let center = match cell.case {
        FeatureCase::Internal => boundary::region_barycenter(&setup.mesh, REGION_FEATURE).map_err(bnd_err)?,
        _ => setup.geometry.theta_center(),
    };
    let problems = problems(cell, center);
    let solver = SolverOptions {
        tol: config.tol,
        max_iter: config.max_iter,
        exec,
    };
    let u = fem::solve_poisson(&setup.sub, &problems.exact, &solver).map_err(fem_err)?;
    let u0 = fem::solve_poisson(&setup.mesh, &problems.defeatured, &solver).map_err(fem_err)?;
    let g_gamma = &problems.g_gamma;
    let d = boundary::boundary_error(|p| g_gamma(p), &u0, TAG_GAMMA).map_err(bnd_err)?;
    let error = fem::defeaturing_error(&u, &u0, &setup.parent_nodes).map_err(fem_err)?;

    let dist = match cell.case {
        FeatureCase::Internal => {
            let outer: Vec<&str> = [TAG_DIRICHLET, TAG_NEUMANN]
                .into_iter()
                .filter(|t| !setup.mesh.facets(t).is_empty())
                .collect();
            Some(boundary::distance_to_tags(&center, &setup.mesh, &outer).map_err(bnd_err)?)
        }
        _ => None,
    };
    let mut outcomes = vec![Outcome {
        variant: None,
        d,
        error,
        mu_green_avg: None,
    }];
    if cell.kind == ExperimentKind::InternalCorrection {
        let data = CorrectionData::assemble(&u0, |p| g_gamma(p), &solver).map_err(cor_err)?;
        let u1 = correction::corrected_solution(&u0, &data).map_err(cor_err)?;
        let d1 = boundary::boundary_error(|p| g_gamma(p), &u1, TAG_GAMMA).map_err(bnd_err)?;
        let error1 = fem::defeaturing_error(&u, &u1, &setup.parent_nodes).map_err(fem_err)?;
        let green = FEFunction::new(setup.mesh.clone(), data.green.clone()).map_err(fem_err)?;
        let green_avg = boundary::trace_of(&green, TAG_GAMMA).map_err(bnd_err)?.average();
        outcomes[0].variant = Some("naive");
        outcomes.push(Outcome {
            variant: Some("corrected"),
            d: d1,
            error: error1,
            mu_green_avg: Some(data.mu * green_avg),
        });
    }
    Ok(CellSolution {
        outcomes,
        dist,
        dof: setup.mesh.num_nodes(),
        min_edge_length: setup.mesh.min_edge_length(),
    })
}

/// Solves one cell and evaluates the estimator of its feature family.
pub fn run_cell(
    exec: Execution,
    config: &ExperimentConfig,
    cell: &Cell,
) -> Result<Vec<CellRecord>, ExperimentError> {
    let start = Instant::now();
    let solution = solve_cell(exec, config, cell)?;
    let runtime_ms = if config.record_runtime {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    let est_err = |source| ExperimentError::Estimator {
        cell: cell.label(),
        source,
    };
    let feature_id = cell.shape.to_string();
    solution
        .outcomes
        .into_iter()
        .map(|outcome| {
            let report = match cell.case {
                FeatureCase::DirichletDirichlet => EstimatorReport::dd(&feature_id, &outcome.d),
                FeatureCase::DirichletNeumann => EstimatorReport::dn(&feature_id, &outcome.d),
                FeatureCase::Internal => {
                    EstimatorReport::internal(&feature_id, &outcome.d, solution.dist.unwrap_or(f64::NAN))
                        .map_err(est_err)?
                }
            };
            let report = report.with_error(outcome.error).map_err(est_err)?;
            let shape = match outcome.variant {
                Some(v) => format!("{}/{v}", cell.shape.name()),
                None => cell.shape.name().to_string(),
            };
            Ok(CellRecord {
                row: ResultRow {
                    experiment: cell.kind.name().to_string(),
                    shape,
                    size: cell.size,
                    alpha: cell.alpha,
                    error_h1: outcome.error,
                    estimate: report.estimate,
                    component_avg: report.component_avg,
                    component_navg: report.component_navg,
                    effectivity: report.effectivity.unwrap_or(f64::NAN),
                    dof: solution.dof,
                    runtime_ms,
                },
                report,
                min_edge_length: solution.min_edge_length,
                mu_green_avg: outcome.mu_green_avg,
            })
        })
        .collect()
}

/// Effectivity floor below which no shipped experiment may fall.
pub const EFFECTIVITY_FLOOR: f64 = 0.1;

/// Row-level regressions of a finished sweep: non-positive error or
/// estimate, and effectivity below the family bound (below
/// [`EFFECTIVITY_FLOOR`] for custom experiments).
pub fn check_records(config: &ExperimentConfig, records: &[CellRecord]) -> Vec<String> {
    let mut failures = Vec::new();
    for r in records {
        let row = &r.row;
        let label = format!("{}/{}/size={}", row.experiment, row.shape, row.size);
        if !(row.error_h1 > 0.0 && row.estimate > 0.0) {
            failures.push(format!(
                "{label}: error {:e} and estimate {:e} must be positive",
                row.error_h1, row.estimate
            ));
            continue;
        }
        let bound = match config.experiment {
            ExperimentKind::Custom => EFFECTIVITY_FLOOR,
            _ => eta_min(r.report.case).max(EFFECTIVITY_FLOOR),
        };
        if !(row.effectivity >= bound) {
            failures.push(format!("{label}: effectivity {:.4} below {bound}", row.effectivity));
        }
    }
    failures
}
