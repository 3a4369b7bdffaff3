//! Seeded random-trace suites measuring the constants of the trace
//! inequalities (Poincaré with vanishing ends, Poincaré with zero average,
//! interpolation) across refinement levels.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fractional_seminorm_half_with, verify_interpolation_inequality_with, BoundaryTrace};
use crate::mesh::Point;
use crate::par::{self, Execution};

pub const SUITE_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// ‖μ‖ ≤ C |γ|^{1/2} |μ*|_{1/2} for μ vanishing at the ends of an open γ,
    /// with μ* its extension by zero to the closed curve.
    PoincareOpen,
    /// ‖μ − avg μ‖ ≤ C |γ|^{1/2} |μ|_{1/2} on a closed γ.
    PoincareClosed,
    /// |μ − avg μ|_{1/2} ≤ C sqrt(‖μ − avg μ‖ ‖∇_t μ‖) on a closed γ.
    Interpolation,
}

impl Inequality {
    pub fn name(self) -> &'static str {
        match self {
            Inequality::PoincareOpen => "poincare_open",
            Inequality::PoincareClosed => "poincare_closed",
            Inequality::Interpolation => "interpolation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub samples: usize,
    /// Number of midpoint refinements after the base level.
    pub refinements: usize,
    /// Edges of the base closed curve.
    pub base_edges: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            samples: 200,
            refinements: 1,
            base_edges: 32,
            seed: SUITE_SEED,
            exec: Execution::default(),
        }
    }
}

/// Largest measured ratio per refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub inequality: Inequality,
    pub edges: Vec<usize>,
    pub max_ratio: Vec<f64>,
}

impl SuiteReport {
    pub fn all_finite(&self) -> bool {
        self.max_ratio.iter().all(|r| r.is_finite() && *r > 0.0)
    }

    /// Largest relative change of the maximum ratio between consecutive levels.
    pub fn max_relative_change(&self) -> f64 {
        self.max_ratio
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / w[0])
            .fold(0.0, f64::max)
    }
}

fn circle_points(n: usize) -> Vec<Point> {
    let r = 1.0 / (2.0 * PI);
    (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            Point::new(r * th.cos(), r * th.sin())
        })
        .collect()
}

/// Random trace on the base curve. For the open case, γ is the first half
/// of the loop and the values elsewhere (including the ends of γ) are zero.
fn random_trace(inequality: Inequality, n: usize, rng: &mut ChaCha8Rng) -> BoundaryTrace {
    let points = circle_points(n);
    let values: Vec<f64> = (0..n)
        .map(|k| match inequality {
            Inequality::PoincareOpen if k == 0 || k >= n / 2 => 0.0,
            _ => rng.random_range(-1.0..=1.0),
        })
        .collect();
    BoundaryTrace::polyline(points, values, true).expect("circle trace is valid")
}

fn ratio(exec: Execution, inequality: Inequality, t: &BoundaryTrace) -> f64 {
    match inequality {
        Inequality::PoincareOpen => {
            let gamma_len = t.length() / 2.0;
            t.l2_norm() / (gamma_len.sqrt() * fractional_seminorm_half_with(exec, t))
        }
        Inequality::PoincareClosed => {
            t.minus_average().l2_norm() / (t.length().sqrt() * fractional_seminorm_half_with(exec, t))
        }
        Inequality::Interpolation => {
            verify_interpolation_inequality_with(exec, t).unwrap_or(f64::NAN)
        }
    }
}

/// Runs one suite. The random functions are drawn once on the base curve
/// and refined by midpoint splitting, so each level measures the same
/// functions on a finer edge set.
pub fn run_suite(inequality: Inequality, options: &SuiteOptions) -> SuiteReport {
    let levels = options.refinements + 1;
    let per_sample: Vec<Vec<f64>> = par::map_range(options.exec, options.samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(i as u64));
        let mut t = random_trace(inequality, options.base_edges, &mut rng);
        let mut ratios = Vec::with_capacity(levels);
        for level in 0..levels {
            if level > 0 {
                t = t.refine_midpoints();
            }
            // Pairs inside one sample run sequentially; samples are the
            // parallel unit.
            ratios.push(ratio(Execution::Sequential, inequality, &t));
        }
        ratios
    });
    let max_ratio = (0..levels)
        .map(|l| per_sample.iter().map(|r| r[l]).fold(0.0, f64::max))
        .collect();
    let edges = (0..levels).map(|l| options.base_edges << l).collect();
    SuiteReport {
        inequality,
        edges,
        max_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_are_deterministic_across_policies() {
        let mut options = SuiteOptions {
            samples: 8,
            base_edges: 12,
            ..Default::default()
        };
        for inequality in [
            Inequality::PoincareOpen,
            Inequality::PoincareClosed,
            Inequality::Interpolation,
        ] {
            options.exec = Execution::Sequential;
            let a = run_suite(inequality, &options);
            options.exec = Execution::Parallel;
            let b = run_suite(inequality, &options);
            assert_eq!(a, b);
            assert!(a.all_finite());
        }
    }
}
