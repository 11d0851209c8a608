//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Every quantity that a criterion bounds is recomputed here from the raw
//! trajectory points with independently written formulas rather than read
//! back from the solver's own residual fields.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nhimpact_core::catalog::{
    make_particle_in_disk, make_rolling_disk, sample_incoming_state, Model, RollingDisk,
};
use nhimpact_core::impact::continuous_jump;
use nhimpact_core::stepper::{
    integrate, project_to_discrete_constraint, DiscreteTrajectory, PointKind,
};
use nhimpact_core::{DiscreteLagrangian, Matrix, StepperConfig, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn v(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

fn unit_disk() -> RollingDisk {
    RollingDisk {
        mass: 1.0,
        roll_inertia: 1.0,
        turn_inertia: 1.0,
        radius: 1.0,
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || {
        format!(
            "took {:.3} s, budget {:.3} s",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        )
    })
}

/// Second point on the exact arc, moved onto the discrete constraint.
fn arc_start(model: &Model, q0: &Vector, omega: f64, turn: f64, h: f64) -> Vector {
    let exact = unit_disk().arc(q0, omega, turn, h);
    project_to_discrete_constraint(
        model.constraints.as_ref(),
        q0,
        &exact,
        &StepperConfig::default().newton,
    )
    .expect("projection onto the discrete constraint")
}

/// Midpoint-angle rolling constraint, written out independently of the
/// catalog.
fn disk_discrete_constraint(radius: f64, q0: &Vector, q1: &Vector) -> [f64; 2] {
    let phi = 0.5 * (q0[3] + q1[3]);
    let dtheta = q1[2] - q0[2];
    [
        q1[0] - q0[0] - radius * phi.cos() * dtheta,
        q1[1] - q0[1] - radius * phi.sin() * dtheta,
    ]
}

fn criterion_billiard() -> Outcome {
    let start = Instant::now();
    let model = make_particle_in_disk(1.0, 1.0).map_err(|e| e.to_string())?;
    let traj = integrate(
        &model,
        &v(&[0.0, 0.0]),
        &v(&[0.01, 0.0]),
        0.01,
        400,
        &StepperConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    ensure(traj.impacts.len() >= 2, || {
        format!("only {} impacts", traj.impacts.len())
    })?;
    let mut worst_speed = 0.0f64;
    let mut worst_specular = 0.0f64;
    let mut worst_energy = 0.0f64;
    for (i, record) in traj.impacts.iter().enumerate() {
        let side = if i % 2 == 0 { 1.0 } else { -1.0 };
        ensure((&record.q_bar - v(&[side, 0.0])).amax() < 1e-9, || {
            format!(
                "impact {i} at {:?}, expected ({side}, 0)",
                record.q_bar.as_slice()
            )
        })?;
        let v_in = (&record.q_bar - &record.q_in) / record.h_in;
        let v_out = (&record.q_post - &record.q_bar) / record.h_out;
        let normal = &record.q_bar / record.q_bar.norm();
        let mirrored = &v_in - 2.0 * v_in.dot(&normal) * &normal;
        worst_speed = worst_speed.max((v_out.norm() - v_in.norm()).abs());
        worst_specular = worst_specular.max((&v_out - mirrored).amax());
        worst_energy = worst_energy.max(record.energy_change().abs());
    }
    ensure(worst_speed <= 1e-9, || {
        format!("speed changed by {worst_speed:.3e}")
    })?;
    ensure(worst_specular <= 1e-9, || {
        format!("reflection off specular by {worst_specular:.3e}")
    })?;
    ensure(worst_energy <= 1e-9, || {
        format!("energy changed by {worst_energy:.3e}")
    })?;
    within_budget(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "{} impacts, |dspeed| {worst_speed:.1e}, specular {worst_specular:.1e}, |dE| {worst_energy:.1e}, {:.0} ms",
        traj.impacts.len(),
        elapsed.as_secs_f64() * 1e3
    ))
}

/// Max residual of the interior step equations over every point produced by
/// a full step, recomputed from positions, times and stored multipliers.
fn interior_residuals(
    model: &Model,
    traj: &DiscreteTrajectory,
    radius: Option<f64>,
) -> (usize, f64, f64) {
    let mut count = 0;
    let (mut momentum, mut constraint) = (0.0f64, 0.0f64);
    for k in 2..traj.len() {
        if !matches!(traj.kinds[k], PointKind::Interior | PointKind::Resumed) {
            continue;
        }
        let (q0, q1, q2) = (&traj.points[k - 2], &traj.points[k - 1], &traj.points[k]);
        let h0 = traj.times[k - 1] - traj.times[k - 2];
        let h1 = traj.times[k] - traj.times[k - 1];
        let mass = model.system.mass_matrix(q1);
        let lambda = traj.multipliers[k]
            .as_ref()
            .expect("interior points carry multipliers");
        let mut r = &mass * (q1 - q0) / h0 - &mass * (q2 - q1) / h1;
        if let Some(radius) = radius {
            let (s, c) = q1[3].sin_cos();
            let mu = Matrix::from_row_slice(
                2,
                4,
                &[1.0, 0.0, -radius * c, 0.0, 0.0, 1.0, -radius * s, 0.0],
            );
            r -= mu.transpose() * lambda;
            let [c1, c2] = disk_discrete_constraint(radius, q1, q2);
            constraint = constraint.max(c1.abs()).max(c2.abs());
        }
        momentum = momentum.max(r.amax());
        count += 1;
    }
    (count, momentum, constraint)
}

fn criterion_interior_residuals() -> Outcome {
    let cfg = StepperConfig::default();
    let disk = make_rolling_disk(1.0, 1.0, 1.0, 1.0, 3.0).map_err(|e| e.to_string())?;
    let q0 = v(&[0.0, 0.0, 0.0, 0.3]);
    let q1 = arc_start(&disk, &q0, 1.0, 0.2, 0.01);
    let disk_traj = integrate(&disk, &q0, &q1, 0.01, 6000, &cfg).map_err(|e| e.to_string())?;
    let particle = make_particle_in_disk(1.0, 1.0).map_err(|e| e.to_string())?;
    let billiard = integrate(
        &particle,
        &v(&[0.1, 0.2]),
        &v(&[0.107, 0.203]),
        0.01,
        6000,
        &cfg,
    )
    .map_err(|e| e.to_string())?;

    let (n_disk, mom_disk, con_disk) = interior_residuals(&disk, &disk_traj, Some(1.0));
    let (n_part, mom_part, _) = interior_residuals(&particle, &billiard, None);
    let steps = n_disk + n_part;
    let momentum = mom_disk.max(mom_part);
    ensure(steps >= 10_000, || format!("only {steps} steps checked"))?;
    ensure(momentum <= 1e-10, || {
        format!("step residual {momentum:.3e}")
    })?;
    ensure(con_disk <= 1e-10, || {
        format!("discrete constraint residual {con_disk:.3e}")
    })?;
    Ok(format!(
        "{steps} steps ({} + {} impacts), step residual {momentum:.1e}, constraint residual {con_disk:.1e}",
        disk_traj.impacts.len(),
        billiard.impacts.len()
    ))
}

/// Disk run with exactly one wall impact on C+.
fn single_impact_run() -> Result<(Model, DiscreteTrajectory, Duration), String> {
    let start = Instant::now();
    let model = make_rolling_disk(1.0, 1.0, 1.0, 1.0, 3.0).map_err(|e| e.to_string())?;
    let q0 = v(&[0.0, 0.0, 0.0, 0.3]);
    let q1 = arc_start(&model, &q0, 1.0, 0.2, 0.01);
    let traj = integrate(&model, &q0, &q1, 0.01, 300, &StepperConfig::default())
        .map_err(|e| e.to_string())?;
    Ok((model, traj, start.elapsed()))
}

fn criterion_disk_impact() -> Outcome {
    let (model, traj, elapsed) = single_impact_run()?;
    ensure(traj.impacts.len() == 1, || {
        format!("{} impacts, expected 1", traj.impacts.len())
    })?;
    let record = &traj.impacts[0];
    let ic = model
        .boundary(&record.constraint_label)
        .ok_or("unknown constraint label")?;
    let ld = model.lagrangian.as_ref();

    let gap = ic.gap(&record.q_bar).abs();
    ensure(gap <= 1e-9, || format!("|g(q_bar)| = {gap:.3e}"))?;
    ensure(record.alpha > 1e-6 && record.alpha < 1.0 - 1e-6, || {
        format!("alpha = {}", record.alpha)
    })?;
    ensure(record.lambda_bar >= 0.0, || {
        format!("lambda_bar = {}", record.lambda_bar)
    })?;

    let mu = model.constraints.one_forms(&record.q_bar);
    let momentum = ld.d2(&record.q_in, &record.q_bar, record.h_in)
        + ld.d1(&record.q_bar, &record.q_post, record.h_out)
        - record.lambda_bar * ic.gap_gradient(&record.q_bar)
        + mu.transpose() * &record.nu;
    let d3 = ld.d3(&record.q_in, &record.q_bar, record.h_in)
        - ld.d3(&record.q_bar, &record.q_post, record.h_out);
    ensure(momentum.amax() <= 1e-10, || {
        format!("momentum residual {:.3e}", momentum.amax())
    })?;
    ensure(d3.abs() <= 1e-10, || {
        format!("D3 residual {:.3e}", d3.abs())
    })?;
    for (name, q) in [("q_i", &record.q_post), ("q_i+1", &record.q_resume)] {
        for b in &model.boundaries {
            let g = b.gap(q);
            ensure(g <= 1e-9, || {
                format!("g({name}) = {g:.3e} for {}", b.label())
            })?;
        }
    }
    within_budget(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "{} at t = {:.6}, alpha {:.4}, lambda_bar {:.4}, momentum {:.1e}, D3 {:.1e}, {:.0} ms",
        record.constraint_label,
        record.t_bar,
        record.alpha,
        record.lambda_bar,
        momentum.amax(),
        d3.abs(),
        elapsed.as_secs_f64() * 1e3
    ))
}

/// Post-impact velocity by a one-parameter search: write `v_plus = B c` in
/// the distribution basis `B`; the jump condition restricts `c` to the line
/// `c0 - s (B^T M B)^-1 B^T dg`, and energy conservation picks the nonzero
/// root in `s`, found by scanning and bisection.
fn brute_force_jump(
    disk: &RollingDisk,
    q: &Vector,
    v_minus: &Vector,
    dg: &Vector,
) -> Option<Vector> {
    let [b1, b2] = disk.distribution_basis(q);
    let basis = Matrix::from_columns(&[b1, b2]);
    let mass = disk.mass_matrix();
    let reduced = basis.transpose() * &mass * &basis;
    let c0 = reduced
        .clone()
        .lu()
        .solve(&(basis.transpose() * &mass * v_minus))?;
    let dir = reduced.lu().solve(&(basis.transpose() * dg))?;
    let velocity = |s: f64| &basis * (&c0 - s * &dir);
    let energy = |s: f64| {
        let w = velocity(s);
        0.5 * w.dot(&(&mass * &w)) - 0.5 * v_minus.dot(&(&mass * v_minus))
    };
    // energy(s) is a convex parabola with roots 0 and s*; scan away from 0
    // until it turns positive again.
    let step = 1e-3;
    let mut lo = step;
    if energy(lo) >= 0.0 {
        return None;
    }
    let mut hi = lo;
    while energy(hi) < 0.0 {
        lo = hi;
        hi += step;
        if hi > 1e3 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if energy(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(velocity(0.5 * (lo + hi)))
}

fn criterion_continuous_jump() -> Outcome {
    let model = make_rolling_disk(1.0, 1.0, 1.0, 1.0, 3.0).map_err(|e| e.to_string())?;
    let disk = unit_disk();
    let cfg = StepperConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let (mut energy, mut drift, mut decomposition, mut oracle) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for trial in 0..100 {
        let boundary = trial % 2;
        let (q, v_minus) =
            sample_incoming_state(&model, boundary, &mut rng).map_err(|e| e.to_string())?;
        let ic = model.boundaries[boundary].as_ref();
        let jump = continuous_jump(
            model.system.as_ref(),
            model.constraints.as_ref(),
            ic,
            &q,
            &v_minus,
            &cfg,
        )
        .map_err(|e| format!("state {trial}: {e}"))?;
        let mass = disk.mass_matrix();
        let dg = ic.gap_gradient(&q);
        let mu = model.constraints.one_forms(&q);
        let kinetic = |w: &Vector| 0.5 * w.dot(&(&mass * w));
        energy = energy.max((kinetic(&jump.v_plus) - kinetic(&v_minus)).abs());
        drift = drift.max((&mu * &jump.v_plus).amax());
        let outgoing = dg.dot(&jump.v_plus);
        ensure(outgoing <= 0.0, || {
            format!("state {trial}: dg . v_plus = {outgoing:.3e}")
        })?;
        let r =
            &mass * (&jump.v_plus - &v_minus) + jump.lambda_bar * &dg - mu.transpose() * &jump.nu;
        decomposition = decomposition.max(r.amax());
        let reference = brute_force_jump(&disk, &q, &v_minus, &dg)
            .ok_or_else(|| format!("state {trial}: one-parameter search found no reflection"))?;
        oracle = oracle.max((&jump.v_plus - reference).amax());
    }
    ensure(energy <= 1e-10, || format!("energy error {energy:.3e}"))?;
    ensure(drift <= 1e-10, || format!("|mu v_plus| = {drift:.3e}"))?;
    ensure(decomposition <= 1e-10, || {
        format!("decomposition residual {decomposition:.3e}")
    })?;
    ensure(oracle <= 1e-8, || {
        format!("differs from the one-parameter search by {oracle:.3e}")
    })?;
    Ok(format!(
        "100 states, |dE| {energy:.1e}, |mu v+| {drift:.1e}, decomposition {decomposition:.1e}, vs search {oracle:.1e}"
    ))
}

fn criterion_convergence() -> Outcome {
    let start = Instant::now();
    let model = make_rolling_disk(1.0, 1.0, 1.0, 1.0, 3.0).map_err(|e| e.to_string())?;
    let disk = unit_disk();
    let q0 = v(&[0.0, 0.0, 0.0, 0.0]);
    let (omega, turn, t_end) = (0.5, 1.0, 2.0);
    let exact = disk.arc(&q0, omega, turn, t_end);
    let mut errors = Vec::new();
    for h in [1e-2, 5e-3, 2.5e-3] {
        let steps = (t_end / h).round() as usize;
        let q1 = arc_start(&model, &q0, omega, turn, h);
        let traj = integrate(&model, &q0, &q1, h, steps, &StepperConfig::default())
            .map_err(|e| e.to_string())?;
        ensure(traj.impacts.is_empty(), || {
            "scenario is not impact-free".to_string()
        })?;
        errors.push((traj.last().expect("non-empty") - &exact).amax());
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    for &p in &orders {
        ensure(p >= 0.8, || {
            format!("measured order {p:.3} (errors {errors:?})")
        })?;
    }
    within_budget(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "errors {:.2e} {:.2e} {:.2e}, orders {:.2} {:.2}, {:.0} ms",
        errors[0],
        errors[1],
        errors[2],
        orders[0],
        orders[1],
        start.elapsed().as_secs_f64() * 1e3
    ))
}

fn criterion_energy_drift() -> Outcome {
    let (model, traj, _) = single_impact_run()?;
    let record = traj.impacts.first().ok_or("no impact")?;
    let ld = model.lagrangian.as_ref();
    let d3 = (ld.d3(&record.q_in, &record.q_bar, record.h_in)
        - ld.d3(&record.q_bar, &record.q_post, record.h_out))
    .abs();
    ensure(d3 <= 1e-10, || format!("D3 residual {d3:.3e}"))?;

    // Independent recomputation of the logged energies from the trajectory:
    // the last full interval before the impact and the first one after it.
    let mass = model.system.mass_matrix(&record.q_bar);
    let kinetic = |a: &Vector, b: &Vector, dt: f64| {
        let w = (b - a) / dt;
        0.5 * w.dot(&(&mass * &w))
    };
    let before = kinetic(&record.q_prev, &record.q_in, record.h_prev);
    let after = kinetic(&record.q_post, &record.q_resume, record.h);
    let change = record.energy_change();
    ensure(change.is_finite(), || {
        "energy change is not finite".to_string()
    })?;
    ensure((change - (after - before)).abs() <= 1e-12, || {
        format!(
            "logged change {change:.6e} disagrees with recomputed {:.6e}",
            after - before
        )
    })?;
    Ok(format!(
        "E before {:.12}, after {:.12}, change {change:.3e}, D3 residual {d3:.1e}",
        record.physical_energy_before, record.physical_energy_after
    ))
}

/// Central difference of `f` in every coordinate of `x`, as columns.
fn central_jacobian<F: Fn(&Vector) -> Vector>(f: F, x: &Vector) -> Matrix {
    let eps = 1e-6;
    let cols: Vec<Vector> = (0..x.len())
        .map(|k| {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[k] += eps;
            minus[k] -= eps;
            (f(&plus) - f(&minus)) / (2.0 * eps)
        })
        .collect();
    Matrix::from_columns(&cols)
}

fn central_scalar<F: Fn(f64) -> Vector>(f: F, s: f64) -> Vector {
    let eps = 1e-6;
    (f(s + eps) - f(s - eps)) / (2.0 * eps)
}

struct Mismatch {
    worst: f64,
    what: &'static str,
}

impl Mismatch {
    /// Relative error with a unit floor on the scale, so identically zero
    /// entries are compared absolutely.
    fn check(&mut self, what: &'static str, analytic: &Matrix, fd: &Matrix) {
        let scale = fd.amax().max(1.0);
        let err = (analytic - fd).amax() / scale;
        if err > self.worst {
            self.worst = err;
            self.what = what;
        }
    }

    fn check_vec(&mut self, what: &'static str, analytic: &Vector, fd: &Vector) {
        let a = Matrix::from_column_slice(analytic.len(), 1, analytic.as_slice());
        let b = Matrix::from_column_slice(fd.len(), 1, fd.as_slice());
        self.check(what, &a, &b);
    }
}

fn derivative_checks(
    model: &Model,
    sample: impl Fn(&mut ChaCha8Rng) -> (Vector, Vector, Vector),
    rng: &mut ChaCha8Rng,
    m: &mut Mismatch,
) {
    let sys = model.system.as_ref();
    let cs = model.constraints.as_ref();
    let ld: &dyn DiscreteLagrangian = model.lagrangian.as_ref();
    for _ in 0..100 {
        let (q, qd, q1) = sample(rng);
        let h = rng.random_range(0.01..0.2);
        let scalar = |x: f64| Vector::from_element(1, x);

        let dv = central_jacobian(|y| scalar(sys.potential(y)), &q).transpose();
        m.check_vec(
            "dV",
            &sys.potential_gradient(&q),
            &dv.column(0).into_owned(),
        );
        for b in &model.boundaries {
            let dg = central_jacobian(|y| scalar(b.gap(y)), &q).transpose();
            m.check_vec("dg", &b.gap_gradient(&q), &dg.column(0).into_owned());
        }
        let kin =
            central_jacobian(|y| scalar(0.5 * qd.dot(&(sys.mass_matrix(y) * &qd))), &q).transpose();
        m.check_vec(
            "d/dq kinetic energy",
            &sys.kinetic_gradient(&q, &qd),
            &kin.column(0).into_owned(),
        );
        let m_rate = {
            let f = |s: f64| {
                let y = &q + s * &qd;
                let mm = sys.mass_matrix(&y);
                Vector::from_column_slice(mm.as_slice())
            };
            let d = central_scalar(f, 0.0);
            Matrix::from_column_slice(q.len(), q.len(), d.as_slice())
        };
        m.check("dM . v", &sys.mass_matrix_rate(&q, &qd), &m_rate);

        if cs.count() > 0 {
            let rows = cs.count();
            let mu_rate = {
                let f = |s: f64| {
                    let mu = cs.one_forms(&(&q + s * &qd));
                    Vector::from_column_slice(mu.as_slice())
                };
                let d = central_scalar(f, 0.0);
                Matrix::from_column_slice(rows, q.len(), d.as_slice())
            };
            m.check("dmu . v", &cs.one_forms_rate(&q, &qd), &mu_rate);
            m.check(
                "d mu_d / dq0",
                &cs.discrete_jacobian_q0(&q, &q1),
                &central_jacobian(|y| cs.discrete(y, &q1), &q),
            );
            m.check(
                "d mu_d / dq1",
                &cs.discrete_jacobian_q1(&q, &q1),
                &central_jacobian(|y| cs.discrete(&q, y), &q1),
            );
        }

        let d1 = central_jacobian(|y| scalar(ld.value(y, &q1, h)), &q).transpose();
        m.check_vec("D1 Ld", &ld.d1(&q, &q1, h), &d1.column(0).into_owned());
        let d2 = central_jacobian(|y| scalar(ld.value(&q, y, h)), &q1).transpose();
        m.check_vec("D2 Ld", &ld.d2(&q, &q1, h), &d2.column(0).into_owned());
        let d3 = central_scalar(|s| scalar(ld.value(&q, &q1, s)), h);
        m.check_vec("D3 Ld", &scalar(ld.d3(&q, &q1, h)), &d3);
        m.check(
            "d(D1 Ld)/dq1",
            &ld.d1_jacobian_q1(&q, &q1, h),
            &central_jacobian(|y| ld.d1(&q, y, h), &q1),
        );
        m.check_vec(
            "d(D1 Ld)/dh",
            &ld.d1_rate_h(&q, &q1, h),
            &central_scalar(|s| ld.d1(&q, &q1, s), h),
        );
        let d3q = central_jacobian(|y| scalar(ld.d3(&q, y, h)), &q1).transpose();
        m.check_vec(
            "d(D3 Ld)/dq1",
            &ld.d3_gradient_q1(&q, &q1, h),
            &d3q.column(0).into_owned(),
        );
    }
}

fn criterion_derivatives() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatch = Mismatch {
        worst: 0.0,
        what: "none",
    };
    let disk = make_rolling_disk(1.3, 0.7, 0.4, 0.8, 3.0).map_err(|e| e.to_string())?;
    derivative_checks(
        &disk,
        |rng| {
            let q = v(&[
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
            ]);
            let qd = v(&(0..4)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<_>>());
            let q1 = &q
                + v(&(0..4)
                    .map(|_| rng.random_range(-0.1..0.1))
                    .collect::<Vec<_>>());
            (q, qd, q1)
        },
        &mut rng,
        &mut mismatch,
    );
    let particle = make_particle_in_disk(2.5, 1.5).map_err(|e| e.to_string())?;
    derivative_checks(
        &particle,
        |rng| {
            let q = v(&[rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]);
            let qd = v(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let q1 = &q + v(&[rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)]);
            (q, qd, q1)
        },
        &mut rng,
        &mut mismatch,
    );
    ensure(mismatch.worst <= 1e-6, || {
        format!(
            "{} differs from central differences by {:.3e} (relative)",
            mismatch.what, mismatch.worst
        )
    })?;
    Ok(format!(
        "200 states, worst relative mismatch {:.1e} ({})",
        mismatch.worst, mismatch.what
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 7] = [
        ("billiard reduction", criterion_billiard),
        ("interior residuals", criterion_interior_residuals),
        ("discrete impact system", criterion_disk_impact),
        ("continuous jump oracle", criterion_continuous_jump),
        ("convergence", criterion_convergence),
        ("energy drift across impact", criterion_energy_drift),
        ("derivative hygiene", criterion_derivatives),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {}. {name}: {reason}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
