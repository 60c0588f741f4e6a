use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use linflow::conjugacy::{verify_conjugacy, VerifyOptions};
use linflow::linalg::expm;
use linflow::spectral::{decompose_matrix, DEFAULT_TOL_REALPART};
use linflow::GroupElement;
use linflow_bench::{heisenberg_conjugacy, splitting, test_matrix};

fn bench_expm(c: &mut Criterion) {
    let mut group = c.benchmark_group("expm");
    for n in [4, 16, 64] {
        let m = test_matrix(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| expm(black_box(m)).unwrap()));
    }
    group.finish();
}

fn bench_decompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral_decompose");
    for n in [4, 16, 64] {
        let m = test_matrix(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| decompose_matrix(black_box(m), DEFAULT_TOL_REALPART).unwrap())
        });
    }
    group.finish();
}

fn bench_group(c: &mut Criterion) {
    let mut bch = c.benchmark_group("bch");
    for n in [3, 5, 7] {
        let s = splitting(n);
        let y = s.point.map(|v| -0.5 * v);
        bch.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| s.group.bch(black_box(&s.point), black_box(&y)).unwrap())
        });
    }
    bch.finish();

    let mut split = c.benchmark_group("split_plus_minus");
    for n in [3, 5, 7] {
        let s = splitting(n);
        let g = GroupElement(s.point.clone());
        split.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| s.group.split_plus_minus(black_box(&g), &s.decomposition).unwrap())
        });
    }
    split.finish();
}

fn bench_verify(c: &mut Criterion) {
    let gc = heisenberg_conjugacy();
    let opts = VerifyOptions { samples: 100, ..VerifyOptions::default() };
    c.bench_function("verify_conjugacy/100", |b| b.iter(|| verify_conjugacy(&gc, black_box(&opts)).unwrap()));
}

criterion_group!(benches, bench_expm, bench_decompose, bench_group, bench_verify);
criterion_main!(benches);
