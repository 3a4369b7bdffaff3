//! Property suites run by `defeatr verify`: boundary-norm scaling, the
//! Poincaré and interpolation inequalities, estimator homogeneity, the FEM
//! patch test and convergence rate, and DD reliability on a small sweep.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{runners, ExperimentConfig, ExperimentKind};
use crate::boundary::suites::{run_suite, Inequality, SuiteOptions, SUITE_SEED};
use crate::boundary::{fractional_seminorm_half_with, BoundaryTrace};
use crate::estimators::{self, FeatureCase};
use crate::fem::{self, PoissonProblem, SolverOptions};
use crate::mesh::{generate_template, FeatureGeometry, FeatureShape, Mesh, Point, TAG_DIRICHLET, TAG_GAMMA};
use crate::par::Execution;

/// Relative tolerance of the scaling law.
pub const SCALING_TOL: f64 = 1e-9;
/// Relative tolerance of estimator homogeneity.
pub const HOMOGENEITY_TOL: f64 = 1e-12;
/// Largest allowed change of an inequality ratio between refinement levels.
pub const SUITE_MAX_CHANGE: f64 = 0.2;
pub const PATCH_TOL: f64 = 1e-10;
/// Accepted H¹ convergence rates of P1 elements.
pub const RATE_RANGE: (f64, f64) = (0.85, 1.15);

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub exec: Execution,
    /// Samples of the random-trace inequality suites.
    pub samples: usize,
    /// DD estimator under test; replaced by mutation tests.
    pub estimator_dd: fn(&BoundaryTrace) -> f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: SUITE_SEED,
            exec: Execution::default(),
            samples: 200,
            estimator_dd: estimators::estimator_dd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub results: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&SuiteResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail)?;
        }
        Ok(())
    }
}

pub fn verify() -> VerifyReport {
    verify_with(&VerifyOptions::default())
}

pub fn verify_with(options: &VerifyOptions) -> VerifyReport {
    let mut results = vec![scaling(options)];
    for inequality in [Inequality::PoincareOpen, Inequality::PoincareClosed, Inequality::Interpolation] {
        results.push(inequality_suite(inequality, options));
    }
    results.push(homogeneity(options));
    results.push(dn_decomposition(options));
    results.push(patch_test(options));
    results.push(convergence(options));
    results.push(dd_reliability(options));
    VerifyReport { results }
}

fn result(name: &'static str, passed: bool, detail: String) -> SuiteResult {
    SuiteResult { name, passed, detail }
}

/// Random trace on a circle of circumference 1, closed or open.
fn random_trace(rng: &mut ChaCha8Rng, n: usize, closed: bool) -> BoundaryTrace {
    let count = if closed { n } else { n + 1 };
    let points = (0..count)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64 * if closed { 1.0 } else { 0.5 };
            Point::new(th.cos() / (2.0 * PI), th.sin() / (2.0 * PI))
        })
        .collect();
    let values = (0..count).map(|_| rng.random_range(-1.0..=1.0)).collect();
    BoundaryTrace::polyline(points, values, closed).expect("random trace is valid")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// ‖·‖_{L²} ~ λ^{1/2}, ‖∇_t·‖_{L²} ~ λ^{−1/2}, |·|_{H^{1/2}} ~ λ⁰ under x ↦ λx.
pub fn scaling(options: &VerifyOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut worst: f64 = 0.0;
    for closed in [true, false] {
        let t = random_trace(&mut rng, 48, closed);
        let base = (
            t.l2_norm(),
            t.tangential_gradient_l2(),
            fractional_seminorm_half_with(options.exec, &t),
        );
        for lambda in [0.1, 1.0, 10.0] {
            let s = t.map_points(|p| Point::from(p.coords * lambda));
            worst = worst
                .max(rel(s.l2_norm(), base.0 * lambda.sqrt()))
                .max(rel(s.tangential_gradient_l2(), base.1 / lambda.sqrt()))
                .max(rel(fractional_seminorm_half_with(options.exec, &s), base.2));
        }
    }
    result(
        "scaling",
        worst <= SCALING_TOL,
        format!("max relative deviation {worst:.2e} (tolerance {SCALING_TOL:.0e})"),
    )
}

pub fn inequality_suite(inequality: Inequality, options: &VerifyOptions) -> SuiteResult {
    let report = run_suite(
        inequality,
        &SuiteOptions {
            samples: options.samples,
            seed: options.seed,
            exec: options.exec,
            ..Default::default()
        },
    );
    let change = report.max_relative_change();
    let ratios: Vec<String> = report.max_ratio.iter().map(|r| format!("{r:.4}")).collect();
    result(
        inequality.name(),
        report.all_finite() && change <= SUITE_MAX_CHANGE,
        format!(
            "max ratio [{}] over {} samples, change {:.1}%",
            ratios.join(", "),
            options.samples,
            100.0 * change
        ),
    )
}

/// estimator(λd) = |λ| estimator(d) for all three estimators.
pub fn homogeneity(options: &VerifyOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x4F4D);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let open = random_trace(&mut rng, 24, false);
        let closed = random_trace(&mut rng, 24, true);
        let c = rng.random_range(0.5..3.0);
        let internal = |t: &BoundaryTrace| estimators::estimator_internal(t, c).unwrap_or(f64::NAN);
        for lambda in [-3.0, -1.0, 0.5, 7.0] {
            let checks = [
                ((options.estimator_dd)(&open), (options.estimator_dd)(&open.map_values(|v| lambda * v))),
                (
                    estimators::estimator_dn(&open),
                    estimators::estimator_dn(&open.map_values(|v| lambda * v)),
                ),
                (internal(&closed), internal(&closed.map_values(|v| lambda * v))),
            ];
            for (base, scaled) in checks {
                let expected = lambda.abs() * base;
                worst = worst.max((scaled - expected).abs() / expected.abs().max(1.0));
            }
        }
    }
    result(
        "homogeneity",
        worst <= HOMOGENEITY_TOL,
        format!("max relative deviation {worst:.2e} (tolerance {HOMOGENEITY_TOL:.0e})"),
    )
}

/// estimator_dn(d) = estimator_dn(d − avg) + |avg| in two dimensions.
pub fn dn_decomposition(options: &VerifyOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x444E);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let shift = rng.random_range(-2.0..2.0);
        let t = random_trace(&mut rng, 24, false).map_values(|v| v + shift);
        let lhs = estimators::estimator_dn(&t);
        let rhs = estimators::estimator_dn(&t.minus_average()) + t.average().abs();
        worst = worst.max((lhs - rhs).abs() / lhs.max(1.0));
    }
    result(
        "dn_decomposition",
        worst <= HOMOGENEITY_TOL,
        format!("max relative deviation {worst:.2e}"),
    )
}

/// Linear data is reproduced exactly on a structured and a generated mesh.
pub fn patch_test(options: &VerifyOptions) -> SuiteResult {
    let exact = |p: Point| 1.0 + 2.0 * p.x - 3.0 * p.y;
    let solver = SolverOptions {
        tol: 1e-13,
        max_iter: None,
        exec: options.exec,
    };
    let mut worst: f64 = 0.0;
    let mut meshes = vec![Arc::new(Mesh::unit_square(8))];
    match generate_template(&FeatureGeometry::internal(FeatureShape::Star, 0.25), 0.1)
        .and_then(|m| m.extract_exact_submesh())
    {
        Ok(sub) => meshes.push(Arc::new(sub.mesh)),
        Err(e) => return result("patch", false, format!("mesh generation failed: {e}")),
    }
    for mesh in &meshes {
        let mut problem = PoissonProblem::new(fem::constant(0.0)).dirichlet(TAG_DIRICHLET, fem::field(exact));
        if !mesh.facets(TAG_GAMMA).is_empty() {
            problem = problem.dirichlet(TAG_GAMMA, fem::field(exact));
        }
        match fem::solve_poisson(mesh, &problem, &solver) {
            Ok(u) => {
                for (p, v) in mesh.nodes().iter().zip(u.values()) {
                    worst = worst.max((v - exact(*p)).abs());
                }
            }
            Err(e) => return result("patch", false, format!("solve failed: {e}")),
        }
    }
    result(
        "patch",
        worst <= PATCH_TOL,
        format!("max nodal error {worst:.2e} on {} meshes", meshes.len()),
    )
}

/// H¹ errors and observed rates for sin(πx) sin(πy) on [0, 1]² with
/// n = 8, 16, 32, 64.
pub fn convergence_rates(exec: Execution) -> Result<(Vec<f64>, Vec<f64>), fem::FemError> {
    let solver = SolverOptions {
        tol: 1e-12,
        max_iter: None,
        exec,
    };
    let problem = PoissonProblem::new(fem::field(|p| 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin()))
        .dirichlet(TAG_DIRICHLET, fem::constant(0.0));
    let grad = |p: Point| {
        Vector2::new(
            PI * (PI * p.x).cos() * (PI * p.y).sin(),
            PI * (PI * p.x).sin() * (PI * p.y).cos(),
        )
    };
    let mut errors = Vec::new();
    for n in [8, 16, 32, 64] {
        let mesh = Arc::new(Mesh::unit_square(n));
        let u = fem::solve_poisson(&mesh, &problem, &solver)?;
        errors.push(fem::h1_seminorm_error(&u, grad));
    }
    let rates = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok((errors, rates))
}

pub fn convergence(options: &VerifyOptions) -> SuiteResult {
    match convergence_rates(options.exec) {
        Ok((_, rates)) => {
            let ok = rates.iter().all(|r| (RATE_RANGE.0..=RATE_RANGE.1).contains(r));
            let shown: Vec<String> = rates.iter().map(|r| format!("{r:.3}")).collect();
            result("convergence", ok, format!("H1 rates [{}]", shown.join(", ")))
        }
        Err(e) => result("convergence", false, format!("solve failed: {e}")),
    }
}

/// Effectivity of the DD estimator under test stays above the recorded
/// bound on a small disk sweep.
pub fn dd_reliability(options: &VerifyOptions) -> SuiteResult {
    let mut config = ExperimentConfig::new(ExperimentKind::DdShapes);
    config.shapes = vec![FeatureShape::Disk];
    config.sizes = vec![0.25, 0.0625];
    config.seed = options.seed;
    let bound = runners::eta_min(FeatureCase::DirichletDirichlet);
    let mut lowest = f64::INFINITY;
    for cell in runners::cells(&config) {
        match runners::solve_cell(options.exec, &config, &cell) {
            Ok(solution) => {
                for outcome in &solution.outcomes {
                    let estimate = (options.estimator_dd)(&outcome.d);
                    lowest = lowest.min(estimate / outcome.error);
                }
            }
            Err(e) => return result("dd_reliability", false, format!("{e}")),
        }
    }
    result(
        "dd_reliability",
        lowest >= bound,
        format!("lowest effectivity {lowest:.4} (bound {bound})"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_suites_pass() {
        let options = VerifyOptions {
            samples: 16,
            ..Default::default()
        };
        assert!(scaling(&options).passed);
        assert!(homogeneity(&options).passed);
        assert!(dn_decomposition(&options).passed);
    }

    #[test]
    fn patch_and_convergence_pass() {
        let options = VerifyOptions::default();
        let patch = patch_test(&options);
        assert!(patch.passed, "{}", patch.detail);
        let conv = convergence(&options);
        assert!(conv.passed, "{}", conv.detail);
    }
}
