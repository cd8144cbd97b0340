//! Per-step costs of the projection and splitting primitives, plus a short
//! end-to-end run of each driver.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fixiter_core::engine::{run_damped_dr, run_km, LambdaSchedule, RunOptions};
use fixiter_core::geometry::ConvexSet;
use fixiter_core::operators::{dr_op, projection_op};

fn plane_pair() -> (ConvexSet, ConvexSet) {
    let line = ConvexSet::hyperplane(vec![1.0, 0.0], 0.0).unwrap();
    let ball = ConvexSet::ball(vec![-1.0, 0.0], 1.0).unwrap();
    (line, ball)
}

fn bench_projections(c: &mut Criterion) {
    let ball = ConvexSet::ball(vec![-1.0, 0.0], 1.0).unwrap();
    let epi4 = ConvexSet::epigraph_power_norm(1, 4).unwrap();
    let x = [1.7, -2.3];

    c.bench_function("project/ball", |b| {
        b.iter(|| ball.project(black_box(&x)).unwrap())
    });
    // The only projection with an inner Newton solve.
    c.bench_function("project/power_epigraph_d4", |b| {
        b.iter(|| epi4.project(black_box(&x)).unwrap())
    });
}

fn bench_operator_steps(c: &mut Criterion) {
    let (line, ball) = plane_pair();
    let proj = projection_op(line.clone());
    let dr = dr_op(&line, &ball).unwrap();
    let x = [3.0, 4.0];

    c.bench_function("step/projection", |b| b.iter(|| proj.apply(black_box(&x))));
    c.bench_function("step/dr_pair", |b| b.iter(|| dr.apply(black_box(&x))));
}

fn bench_short_runs(c: &mut Criterion) {
    let (line, ball) = plane_pair();
    let dr = dr_op(&line, &ball).unwrap();
    let x0 = [3.0, 4.0];
    let mut opts = RunOptions::horizon(100);
    opts.limit_proxy = false;
    opts.stop.residual_tol = 0.0;

    c.bench_function("run/km_100_steps", |b| {
        b.iter(|| {
            run_km(
                black_box(&dr),
                &LambdaSchedule::Constant(0.5),
                black_box(&x0),
                &opts,
            )
            .unwrap()
        })
    });
    c.bench_function("run/damped_dr_100_steps", |b| {
        b.iter(|| {
            run_damped_dr(
                black_box(&line),
                black_box(&ball),
                1.0,
                &LambdaSchedule::Constant(1.0),
                black_box(&x0),
                &opts,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, bench_projections, bench_operator_steps, bench_short_runs);
criterion_main!(benches);
