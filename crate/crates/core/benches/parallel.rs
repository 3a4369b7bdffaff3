use std::f64::consts::PI;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use defeatr::boundary::suites::{run_suite, Inequality, SuiteOptions};
use defeatr::boundary::{fractional_seminorm_half_with, BoundaryTrace};
use defeatr::experiments::{run_experiment_with, ExperimentConfig, ExperimentKind};
use defeatr::fem::{self, PoissonProblem, SolverOptions};
use defeatr::mesh::{FeatureShape, Mesh, Point, TAG_DIRICHLET};
use defeatr::par::Execution;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn assembly(c: &mut Criterion) {
    let mesh = Mesh::unit_square(128);
    let mut group = c.benchmark_group("assemble_stiffness");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| b.iter(|| fem::assemble_stiffness_with(exec, &mesh).unwrap()));
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let mesh = Arc::new(Mesh::unit_square(64));
    let problem = PoissonProblem::new(fem::constant(1.0)).dirichlet(TAG_DIRICHLET, fem::constant(0.0));
    let mut group = c.benchmark_group("solve_poisson");
    group.sample_size(20);
    for (name, exec) in POLICIES {
        let options = SolverOptions {
            exec,
            ..Default::default()
        };
        group.bench_function(name, |b| b.iter(|| fem::solve_poisson(&mesh, &problem, &options).unwrap()));
    }
    group.finish();
}

fn seminorm(c: &mut Criterion) {
    let mut group = c.benchmark_group("fractional_seminorm");
    for n in [64, 256] {
        let points: Vec<Point> = (0..=n)
            .map(|k| {
                let t = PI * k as f64 / n as f64;
                Point::new(t.cos(), t.sin())
            })
            .collect();
        let values = (0..=n).map(|k| (k as f64 * 0.37).sin()).collect();
        let trace = BoundaryTrace::polyline(points, values, false).unwrap();
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &trace, |b, t| {
                b.iter(|| fractional_seminorm_half_with(exec, t))
            });
        }
    }
    group.finish();
}

fn suites(c: &mut Criterion) {
    let mut group = c.benchmark_group("interpolation_suite");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let options = SuiteOptions {
            samples: 50,
            exec,
            ..Default::default()
        };
        group.bench_function(name, |b| b.iter(|| run_suite(Inequality::Interpolation, &options)));
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let mut config = ExperimentConfig::new(ExperimentKind::DdShapes);
    config.shapes = vec![FeatureShape::Disk, FeatureShape::Square];
    config.sizes = vec![0.25, 0.125, 0.0625];
    let mut group = c.benchmark_group("dd_sweep");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| b.iter(|| run_experiment_with(exec, &config).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, assembly, solve, seminorm, suites, sweep);
criterion_main!(benches);
