use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use segment_bethe_core::bethe::solver::{solve_bethe, SolveOptions};
use segment_bethe_core::sampling::Sampler;
use segment_bethe_core::scalar_products::{
    gaudin_korepin_norm, scalar_product_direct, slavnov_modified, Placement,
};
use segment_bethe_core::Chain;
use segment_bethe_bench::{fixture, Fixture};
use std::hint::black_box;

fn transfer(c: &mut Criterion) {
    let mut g = c.benchmark_group("transfer_matrix");
    for n in 1..=4 {
        let ch: Chain<f64> = Sampler::new(1).chain(n);
        let u = Sampler::new(2).spectral_point(&ch, 1.0, &[]);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| ch.transfer_matrix(black_box(u)).unwrap())
        });
    }
    g.finish();
}

fn solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_bethe");
    g.sample_size(10);
    for n in 1..=3 {
        let ch: Chain<f64> = Sampler::new(3).chain(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| solve_bethe(&ch, &SolveOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn scalar_products(c: &mut Criterion) {
    let mut g = c.benchmark_group("scalar_product");
    for n in 1..=3 {
        let Fixture { chain, on_shell, free } = fixture(n, 5);
        g.bench_with_input(BenchmarkId::new("slavnov", n), &n, |b, _| {
            b.iter(|| slavnov_modified(&chain, &on_shell, &free, Placement::BraOnShell).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("direct", n), &n, |b, _| {
            b.iter(|| scalar_product_direct(&chain, &on_shell, &free).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("norm", n), &n, |b, _| {
            b.iter(|| gaudin_korepin_norm(&chain, &on_shell).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, transfer, solve, scalar_products);
criterion_main!(benches);
