use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nhimpact_bench::{billiard, disk_boundary_state, disk_interior, disk_wall};
use nhimpact_core::impact::continuous_jump;
use nhimpact_core::oracle::{integrate_continuous, ContinuousState};
use nhimpact_core::stepper::{dla_step, integrate};
use nhimpact_core::{OracleConfig, StepperConfig};

fn interior_step(c: &mut Criterion) {
    let s = disk_interior(1);
    let cfg = StepperConfig::default();
    c.bench_function("disk_dla_step", |b| {
        b.iter(|| dla_step(&s.model, black_box(&s.q0), black_box(&s.q1), s.h, &cfg).unwrap())
    });
}

fn trajectories(c: &mut Criterion) {
    let cfg = StepperConfig::default();
    let mut group = c.benchmark_group("integrate");
    let interior = disk_interior(1000);
    group.bench_function("disk_1000_interior_steps", |b| {
        b.iter(|| {
            integrate(
                &interior.model,
                &interior.q0,
                &interior.q1,
                interior.h,
                interior.steps,
                &cfg,
            )
            .unwrap()
        })
    });
    let wall = disk_wall();
    group.bench_function("disk_wall_impact", |b| {
        b.iter(|| integrate(&wall.model, &wall.q0, &wall.q1, wall.h, wall.steps, &cfg).unwrap())
    });
    let bounce = billiard(400);
    group.bench_function("billiard_400_steps", |b| {
        b.iter(|| {
            integrate(
                &bounce.model,
                &bounce.q0,
                &bounce.q1,
                bounce.h,
                bounce.steps,
                &cfg,
            )
            .unwrap()
        })
    });
    group.finish();
}

fn jumps(c: &mut Criterion) {
    let (model, q, v) = disk_boundary_state();
    let cfg = StepperConfig::default();
    c.bench_function("disk_continuous_jump", |b| {
        b.iter(|| {
            continuous_jump(
                model.system.as_ref(),
                model.constraints.as_ref(),
                model.boundaries[0].as_ref(),
                black_box(&q),
                black_box(&v),
                &cfg,
            )
            .unwrap()
        })
    });
}

fn oracle(c: &mut Criterion) {
    let s = disk_interior(1);
    let start = ContinuousState {
        t: 0.0,
        q: s.q0.clone(),
        v: s.v0.clone(),
    };
    let cfg = OracleConfig {
        h_fine: 1e-3,
        ..OracleConfig::default()
    };
    c.bench_function("oracle_disk_1000_rk4_steps", |b| {
        b.iter(|| integrate_continuous(&s.model, &start, 1.0, &cfg).unwrap())
    });
}

criterion_group!(benches, interior_step, trajectories, jumps, oracle);
criterion_main!(benches);
