use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use z2n_bench::{bench_table, dense_series, fixture_atlas};
use z2n_core::{build_splitting_iso, verify_splitting, SolveOrder};

fn series_multiplication(c: &mut Criterion) {
    let table = bench_table();
    let a = dense_series(&table, 4);
    let b = dense_series(&table, 4);
    c.bench_function("series_mul_dense_order4", |bench| {
        bench.iter(|| black_box(&a).mul(black_box(&b)).unwrap())
    });
}

fn cocycle_check(c: &mut Criterion) {
    let atlas = fixture_atlas("nvb3_zsp.atl");
    c.bench_function("check_cocycle_nvb3", |bench| {
        bench.iter(|| black_box(&atlas).check_cocycle(4).unwrap())
    });
    let three = fixture_atlas("three_chart.atl");
    c.bench_function("check_cocycle_three_chart_k6", |bench| {
        bench.iter(|| black_box(&three).check_cocycle(6).unwrap())
    });
}

fn splitting(c: &mut Criterion) {
    let atlas = fixture_atlas("twist_xi_eta.atl");
    c.bench_function("build_splitting_iso_k4", |bench| {
        bench.iter(|| build_splitting_iso(black_box(&atlas), 4, 3, SolveOrder::Declared).unwrap())
    });
    let iso = build_splitting_iso(&atlas, 6, 3, SolveOrder::Declared).unwrap();
    c.bench_function("verify_splitting_k6", |bench| {
        bench.iter(|| verify_splitting(black_box(&atlas), black_box(&iso), 6).unwrap())
    });
}

criterion_group!(benches, series_multiplication, cocycle_check, splitting);
criterion_main!(benches);
