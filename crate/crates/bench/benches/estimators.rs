//! Costs of the rate machinery: exponent estimation, envelope evaluation,
//! and the closed-form recurrence bound.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fixiter_core::diagnostics::{check_envelope, fit_sublinear_exponent};
use fixiter_core::geometry::ConvexSet;
use fixiter_core::operators::{dr_op, FixSet};
use fixiter_core::regularity::{estimate_operator_holder, rate_constants, recurrence_bound};

fn bench_holder_estimator(c: &mut Criterion) {
    let hs = ConvexSet::halfspace(vec![0.0, 1.0], 0.0).unwrap();
    let epi = ConvexSet::epigraph_power_norm(1, 4).unwrap();
    let op = dr_op(&hs, &epi).unwrap().with_known_fix(FixSet::HalfLine {
        anchor: vec![0.0, 0.0],
        direction: vec![0.0, 1.0],
    });
    c.bench_function("estimate/holder_1000_samples", |b| {
        b.iter(|| {
            estimate_operator_holder(black_box(&op), &[-2.0, -2.0], &[2.0, 2.0], 1000, 7).unwrap()
        })
    });
}

fn bench_rate_machinery(c: &mut Criterion) {
    let rc = rate_constants(0.1, 2.0, 1, 1.5).unwrap();
    let errors: Vec<(usize, f64)> = (0..10_000)
        .map(|t| (t, 3.0 / ((t + 1) as f64).sqrt()))
        .collect();

    c.bench_function("envelope/check_10k_points", |b| {
        b.iter(|| check_envelope(black_box(&errors), &rc))
    });
    c.bench_function("fit/sublinear_10k_points", |b| {
        b.iter(|| fit_sublinear_exponent(black_box(&errors)).unwrap())
    });

    let deltas = vec![0.05; 1000];
    c.bench_function("recurrence/bound_1k_deltas", |b| {
        b.iter(|| recurrence_bound(1.0, 1.0, black_box(&deltas), 1000).unwrap())
    });
}

criterion_group!(benches, bench_holder_estimator, bench_rate_machinery);
criterion_main!(benches);
