use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use qqc_bench::{hermitian_of_size, solve_cases};
use qqc_core::adversary::{search_gamma, spectral_bound, WeightMatrix};
use qqc_core::matlin::eig_hermitian;
use qqc_core::problem::fixtures;
use qqc_core::reconstruct::reconstruct;
use qqc_core::sdp::build_primal;
use qqc_core::solver::{solve, SolverConfig};

fn eigendecomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("eig_hermitian");
    for dim in [4, 8, 16, 32] {
        let m = hermitian_of_size(dim, dim as u64);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &m, |b, m| b.iter(|| eig_hermitian(black_box(m))));
    }
    group.finish();
}

fn feasibility(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_primal");
    group.sample_size(10);
    let cfg = SolverConfig::default();
    for (name, p, q) in solve_cases() {
        let prog = build_primal(&p, q, 0.1).unwrap();
        group.bench_function(format!("{name}/q={q}"), |b| b.iter(|| solve(black_box(&prog), &cfg).unwrap()));
    }
    group.finish();
}

fn adversary(c: &mut Criterion) {
    let p = fixtures::or2();
    let w = WeightMatrix::seed(&p).unwrap();
    c.bench_function("spectral_bound/or2", |b| b.iter(|| spectral_bound(black_box(&p), &w, 0.1).unwrap()));
    let mut group = c.benchmark_group("search_gamma");
    group.sample_size(10);
    group.bench_function("or2/budget=40", |b| b.iter(|| search_gamma(black_box(&p), 0.1, 40).unwrap()));
    group.finish();
}

fn reconstruction(c: &mut Criterion) {
    let mut group = c.benchmark_group("reconstruct");
    group.sample_size(10);
    let p = fixtures::deutsch_xor2();
    let cfg = SolverConfig::default();
    group.bench_function("deutsch-xor2/q=1", |b| b.iter(|| reconstruct(black_box(&p), 1, 0.1, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, eigendecomposition, feasibility, adversary, reconstruction);
criterion_main!(benches);
