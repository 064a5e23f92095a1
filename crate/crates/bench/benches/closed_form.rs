use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use passn_bench::decaying_profile;
use passn_core::bounds::{lower_bound_closed, upper_bound};
use passn_core::coverage::{coverage_single, pass_at_n_estimate};
use passn_core::losses::{dco_factor, dco_loss, focal_loss};
use passn_core::optimal::optimal_confidences;
use passn_core::{BoundQuery, SampleTally};

fn coverage(c: &mut Criterion) {
    let mut g = c.benchmark_group("coverage");
    for n in [1u64, 256, 4096] {
        g.bench_with_input(BenchmarkId::new("single", n), &n, |b, &n| {
            b.iter(|| coverage_single(black_box(0.013), n).unwrap())
        });
    }
    let tally = SampleTally::new(10_000, 37).unwrap();
    g.bench_function("estimate_n256_of_10k", |b| {
        b.iter(|| pass_at_n_estimate(black_box(tally), 256).unwrap())
    });
    g.finish();
}

fn losses(c: &mut Criterion) {
    let mut g = c.benchmark_group("losses");
    for n in [16u64, 256, 4096] {
        g.bench_with_input(BenchmarkId::new("dco_factor", n), &n, |b, &n| {
            b.iter(|| dco_factor(black_box(0.3), n).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("dco_loss", n), &n, |b, &n| {
            b.iter(|| dco_loss(black_box(0.3), n).unwrap())
        });
    }
    g.bench_function("focal_gamma2", |b| b.iter(|| focal_loss(black_box(0.3), 2.0).unwrap()));
    g.finish();
}

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimal_confidences");
    for k in [4usize, 32, 256] {
        let acc = decaying_profile(k);
        g.bench_with_input(BenchmarkId::from_parameter(k), &acc, |b, acc| {
            b.iter(|| optimal_confidences(black_box(acc), 100).unwrap())
        });
    }
    g.finish();
}

fn bounds(c: &mut Criterion) {
    let mut g = c.benchmark_group("bounds");
    g.bench_function("upper_case_k", |b| {
        b.iter(|| upper_bound(black_box(&BoundQuery::new(0.5, 0.25, 0.25, 2, 64))).unwrap())
    });
    // root finding over ln p
    g.bench_function("upper_case_j", |b| {
        b.iter(|| upper_bound(black_box(&BoundQuery::new(0.29, 0.17, 0.22, 5, 100))).unwrap())
    });
    g.bench_function("lower_closed", |b| {
        b.iter(|| lower_bound_closed(black_box(0.5), 0.25, 64.0).unwrap())
    });
    g.finish();
}

criterion_group!(benches, coverage, losses, solver, bounds);
criterion_main!(benches);
