// SPDX-License-Identifier: MIT OR Apache-2.0

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use lrsm_core::pqml::fit_pqml;
use lrsm_core::scan::scan_series;
use lrsm_core::select::optimal_partition;
use lrsm_core::{
    builtin_model, lrsm_detect, simulate_mcp, ScanConfig, Window, DEFAULT_BURN_IN, DEFAULT_DELTA,
};

fn bench_fit(c: &mut Criterion) {
    let s = simulate_mcp(&builtin_model("A1", 2000).unwrap(), DEFAULT_BURN_IN, 1);
    let mut g = c.benchmark_group("fit_pqml");
    for p in [1, 3, 5] {
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, &p| {
            b.iter(|| fit_pqml(&s, black_box(Window::new(0, 266)), p, DEFAULT_DELTA).unwrap())
        });
    }
    g.finish();
}

fn bench_scan(c: &mut Criterion) {
    let s = simulate_mcp(&builtin_model("A1", 2000).unwrap(), DEFAULT_BURN_IN, 2);
    let cfg = ScanConfig::new(133);
    c.bench_function("scan_series/n2000_h133", |b| {
        b.iter(|| scan_series(&s, 133, black_box(&cfg)).unwrap())
    });
}

fn bench_select(c: &mut Criterion) {
    let s = simulate_mcp(&builtin_model("B3", 2000).unwrap(), DEFAULT_BURN_IN, 3);
    let pool: Vec<usize> = (1..20).map(|k| k * 100).collect();
    c.bench_function("optimal_partition/19_candidates", |b| {
        b.iter(|| optimal_partition(&s, black_box(&pool), 5, DEFAULT_DELTA).unwrap())
    });
}

fn bench_detect(c: &mut Criterion) {
    let mut g = c.benchmark_group("lrsm_detect");
    g.sample_size(10);
    for n in [1000, 2000, 4000] {
        let s = simulate_mcp(&builtin_model("A1", n).unwrap(), DEFAULT_BURN_IN, 4);
        let cfg = ScanConfig::new(133.min(n / 8));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| lrsm_detect(&s, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_fit, bench_scan, bench_select, bench_detect);
criterion_main!(benches);
