use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use elcomp_core::assembly::{assemble_system, CouplingMode};
use elcomp_core::linalg::dense_inverse;
use elcomp_core::quasilinear::{linearize_with, QuasiSpec};
use elcomp_core::spectral::subdomain_scan;
use elcomp_core::{parse_expr, Exec, Grid, Settings, SystemSpec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn dense(c: &mut Criterion) {
    let grid = Grid::new_2d([0.0, 0.0], [PI, PI], [24, 24]).unwrap();
    let sys = SystemSpec::laplacians(grid, 2)
        .with_coupling(vec![vec![0.0, -0.5], vec![-0.5, 0.0]])
        .sample()
        .unwrap();
    let a = assemble_system(&sys, &CouplingMode::Full, None).unwrap().a;
    let mut group = c.benchmark_group("dense_inverse");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| dense_inverse(&a, 5000, exec).unwrap())
        });
    }
    group.finish();
}

fn scan(c: &mut Criterion) {
    let grid = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [24, 24]).unwrap();
    let sys = SystemSpec::laplacians(grid, 1).sample().unwrap();
    let mut group = c.benchmark_group("subdomain_scan");
    group.sample_size(10);
    for (name, exec) in MODES {
        let set = Settings {
            exec,
            ..Settings::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| subdomain_scan(&sys, 2, &set).unwrap())
        });
    }
    group.finish();
}

fn linearization(c: &mut Criterion) {
    let grid = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [64, 64]).unwrap();
    let lap = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2];
    let mut qs = QuasiSpec::linear(grid.clone(), &lap, &[vec![0.0, 0.5], vec![0.5, 0.0]]);
    qs.flux[0] = vec![
        parse_expr("(1 + u^2) * p1").unwrap(),
        parse_expr("(1 + u^2) * p2").unwrap(),
    ];
    qs.reaction[0] = parse_expr("u1 * u2").unwrap();
    let field = |f: fn([f64; 2]) -> f64| (0..grid.node_count()).map(|x| f(grid.coords(x))).collect::<Vec<_>>();
    let u = vec![field(|c| c[0] * c[1]), field(|c| (3.0 * c[0]).sin())];
    let v = vec![field(|c| -c[1]), field(|c| c[0] * c[0])];
    let mut group = c.benchmark_group("linearize");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| linearize_with(&qs, &u, &v, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, dense, scan, linearization);
criterion_main!(benches);
