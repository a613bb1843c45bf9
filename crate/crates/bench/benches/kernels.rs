use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use renewal_lab::matrix::GroupElement;
use renewal_lab::measure::cone2;
use renewal_lab::proximality::certify_proximal;
use renewal_lab::transfer::{build_operator, Resolvent, StateGrid};
use renewal_lab::walk::lyapunov_estimate;

fn operators(c: &mut Criterion) {
    let rho = cone2();
    let mut group = c.benchmark_group("operator");
    for n in [126, 254, 510] {
        let grid = Arc::new(StateGrid::circle(n, 1).unwrap());
        let z = Complex64::new(0.0, 3.0);
        group.bench_with_input(BenchmarkId::new("build", n), &grid, |b, grid| b.iter(|| build_operator(&rho, black_box(z), grid).unwrap()));
        let op = build_operator(&rho, z, &grid).unwrap();
        group.bench_with_input(BenchmarkId::new("factor", n), &op, |b, op| b.iter(|| Resolvent::new(black_box(op)).unwrap()));
        let res = Resolvent::new(&op).unwrap();
        let f: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), 0.0)).collect();
        group.bench_with_input(BenchmarkId::new("solve", n), &f, |b, f| b.iter(|| res.solve(black_box(f)).unwrap()));
    }
    group.finish();
}

fn walks(c: &mut Criterion) {
    let rho = cone2();
    c.bench_function("lyapunov 1000 x 200", |b| b.iter(|| lyapunov_estimate(&rho, 1000, black_box(200), 1).unwrap()));
    let g = GroupElement::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap().pow(3);
    c.bench_function("certify", |b| b.iter(|| certify_proximal(black_box(&g), 0.2).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = operators, walks
}
criterion_main!(benches);
