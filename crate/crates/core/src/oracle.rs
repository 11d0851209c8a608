//! Reference integrator for the continuous Lagrange-d'Alembert equations.
//!
//! Accelerations come from the saddle-point system
//!
//! ```text
//! [ M(q)  -mu(q)^T ] [ a      ]   [ -dV - (dM.v) v + d/dq(1/2 v^T M v) ]
//! [ mu(q)     0    ] [ lambda ] = [ -(dmu.v) v                          ]
//! ```
//!
//! and are integrated with classical fourth-order Runge-Kutta. Boundary
//! crossings are located by bisection on the step and resolved with
//! [`continuous_jump`](crate::impact::continuous_jump). The oracle exists to
//! check the discrete scheme; it makes no attempt at structure preservation.

use serde::{Deserialize, Serialize};

use crate::catalog::Model;
use crate::error::{Error, Result};
use crate::impact::continuous_jump;
use crate::mechanics::{self, check_vector, ConstraintSet, MechanicalSystem};
use crate::stepper::{project_to_discrete_constraint, StepperConfig};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub h_fine: f64,
    /// Re-project `v` onto `D_q` (M-orthogonally) after every step.
    pub project_velocity: bool,
    /// Bisection stops once `|g| <= gap_tolerance` ...
    pub gap_tolerance: f64,
    /// ... or the bracket is shorter than this.
    pub time_tolerance: f64,
    /// Tolerances and Newton settings for the jump solve.
    pub solver: StepperConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            h_fine: 1e-4,
            project_velocity: false,
            gap_tolerance: 1e-12,
            time_tolerance: 1e-14,
            solver: StepperConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousState {
    pub t: f64,
    pub q: Vector,
    pub v: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpEvent {
    pub t: f64,
    pub constraint_label: String,
    pub q: Vector,
    pub v_minus: Vector,
    pub v_plus: Vector,
    pub lambda_bar: f64,
    pub nu: Vector,
    pub energy_before: f64,
    pub energy_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousTrajectory {
    /// Accepted states. At a jump the pre- and post-impact states are both
    /// stored, with equal times.
    pub states: Vec<ContinuousState>,
    pub events: Vec<JumpEvent>,
    /// Largest `|mu(q) v|_inf` seen along the trajectory.
    pub max_constraint_drift: f64,
}

impl ContinuousTrajectory {
    pub fn final_state(&self) -> &ContinuousState {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }
}

/// Accelerations and multipliers of the Lagrange-d'Alembert equations at
/// `(q, v)`; `v` is assumed to lie in `D_q`.
pub fn lda_acceleration(
    sys: &dyn MechanicalSystem,
    cs: &dyn ConstraintSet,
    q: &Vector,
    v: &Vector,
) -> Result<(Vector, Vector)> {
    let n = sys.dim();
    check_vector("velocity", v, n)?;
    let mass = mechanics::mass_matrix(sys, q)?;
    let mu = mechanics::constraint_matrix(cs, q)?;
    let m = mu.nrows();

    let forcing =
        -sys.potential_gradient(q) - sys.mass_matrix_rate(q, v) * v + sys.kinetic_gradient(q, v);
    let bias = -(cs.one_forms_rate(q, v) * v);

    let mut saddle = Matrix::zeros(n + m, n + m);
    saddle.view_mut((0, 0), (n, n)).copy_from(&mass);
    saddle
        .view_mut((0, n), (n, m))
        .copy_from(&(-mu.transpose()));
    saddle.view_mut((n, 0), (m, n)).copy_from(&mu);
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&forcing);
    rhs.rows_mut(n, m).copy_from(&bias);
    if !rhs.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite { what: "forcing" });
    }
    let sol = saddle.lu().solve(&rhs).ok_or(Error::RankDeficient {
        rank: 0,
        expected: m,
    })?;
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

fn rk4_step(
    sys: &dyn MechanicalSystem,
    cs: &dyn ConstraintSet,
    s: &ContinuousState,
    dt: f64,
) -> Result<ContinuousState> {
    let accel = |q: &Vector, v: &Vector| lda_acceleration(sys, cs, q, v).map(|(a, _)| a);
    let (q, v) = (&s.q, &s.v);
    let k1q = v.clone();
    let k1v = accel(q, v)?;
    let q2 = q + 0.5 * dt * &k1q;
    let v2 = v + 0.5 * dt * &k1v;
    let k2v = accel(&q2, &v2)?;
    let q3 = q + 0.5 * dt * &v2;
    let v3 = v + 0.5 * dt * &k2v;
    let k3v = accel(&q3, &v3)?;
    let q4 = q + dt * &v3;
    let v4 = v + dt * &k3v;
    let k4v = accel(&q4, &v4)?;
    Ok(ContinuousState {
        t: s.t + dt,
        q: q + dt / 6.0 * (k1q + 2.0 * v2 + 2.0 * v3 + v4),
        v: v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    })
}

/// Bisection for a root of `g` in `[t_lo, t_hi]` with `g(t_lo) < 0 < g(t_hi)`.
///
/// Stops when `|g| <= 1e-12` or the bracket is shorter than `1e-14`.
pub fn locate_impact<F: FnMut(f64) -> f64>(g: F, t_lo: f64, t_hi: f64) -> Result<f64> {
    locate_impact_with(g, t_lo, t_hi, 1e-12, 1e-14)
}

pub fn locate_impact_with<F: FnMut(f64) -> f64>(
    mut g: F,
    mut t_lo: f64,
    mut t_hi: f64,
    gap_tolerance: f64,
    time_tolerance: f64,
) -> Result<f64> {
    let g_lo = g(t_lo);
    let g_hi = g(t_hi);
    if !(g_lo < 0.0 && g_hi > 0.0) || !(t_lo < t_hi) {
        return Err(Error::InvalidBracket { g_lo, g_hi });
    }
    let mut mid = 0.5 * (t_lo + t_hi);
    for _ in 0..200 {
        mid = 0.5 * (t_lo + t_hi);
        let gm = g(mid);
        if !gm.is_finite() {
            return Err(Error::NonFinite {
                what: "gap during bisection",
            });
        }
        if gm.abs() <= gap_tolerance || t_hi - t_lo <= time_tolerance {
            break;
        }
        if gm < 0.0 {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
    }
    Ok(mid)
}

/// Integrates from `state0` to `t_end` with steps of at most `cfg.h_fine`,
/// applying the continuous jump at every boundary crossing.
pub fn integrate_continuous(
    model: &Model,
    state0: &ContinuousState,
    t_end: f64,
    cfg: &OracleConfig,
) -> Result<ContinuousTrajectory> {
    let sys = model.system.as_ref();
    let cs = model.constraints.as_ref();
    let n = model.dim();
    check_vector("initial configuration", &state0.q, n)?;
    check_vector("initial velocity", &state0.v, n)?;
    if !(cfg.h_fine > 0.0 && cfg.h_fine.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "h_fine".to_string(),
            reason: "must be positive and finite".to_string(),
        });
    }
    if !(t_end >= state0.t) {
        return Err(Error::InvalidParameter {
            name: "t_end".to_string(),
            reason: format!("must not precede the initial time {}", state0.t),
        });
    }
    for ic in &model.boundaries {
        let g = ic.gap(&state0.q);
        if !(g <= cfg.solver.boundary_tolerance) {
            return Err(Error::Precondition(format!(
                "initial state is not admissible: {} has g = {g:.6e}",
                ic.label()
            )));
        }
    }
    let drift0 = drift(cs, &state0.q, &state0.v);
    if !(drift0 <= cfg.solver.constraint_tolerance) {
        return Err(Error::Precondition(format!(
            "initial velocity leaves the distribution: |mu v| = {drift0:.3e}"
        )));
    }

    let mut traj = ContinuousTrajectory {
        states: vec![state0.clone()],
        events: Vec::new(),
        max_constraint_drift: drift0,
    };
    let mut state = state0.clone();
    while t_end - state.t > cfg.time_tolerance {
        let dt = cfg.h_fine.min(t_end - state.t);
        let mut next = rk4_step(sys, cs, &state, dt)?;

        let mut first: Option<(f64, usize)> = None;
        for (i, ic) in model.boundaries.iter().enumerate() {
            if ic.gap(&next.q) > 0.0 {
                let tau = locate_impact_with(
                    |tau| {
                        if tau == 0.0 {
                            ic.gap(&state.q)
                        } else {
                            rk4_step(sys, cs, &state, tau)
                                .map(|s| ic.gap(&s.q))
                                .unwrap_or(f64::NAN)
                        }
                    },
                    0.0,
                    dt,
                    cfg.gap_tolerance,
                    cfg.time_tolerance,
                )?;
                if first.is_none_or(|(best, _)| tau < best) {
                    first = Some((tau, i));
                }
            }
        }

        if let Some((tau, i)) = first {
            let ic = model.boundaries[i].as_ref();
            let hit = rk4_step(sys, cs, &state, tau)?;
            let dg = mechanics::boundary_gradient(ic, &hit.q)?;
            let normal = dg.dot(&hit.v);
            if normal.abs() < cfg.solver.grazing_tolerance {
                return Err(Error::Grazing {
                    label: ic.label().to_string(),
                    normal_velocity: normal,
                });
            }
            let jump = continuous_jump(sys, cs, ic, &hit.q, &hit.v, &cfg.solver)?;
            traj.events.push(JumpEvent {
                t: hit.t,
                constraint_label: ic.label().to_string(),
                q: hit.q.clone(),
                v_minus: hit.v.clone(),
                v_plus: jump.v_plus.clone(),
                lambda_bar: jump.lambda_bar,
                nu: jump.nu,
                energy_before: jump.energy_before,
                energy_after: jump.energy_after,
            });
            next = ContinuousState {
                t: hit.t,
                q: hit.q.clone(),
                v: jump.v_plus,
            };
            traj.states.push(hit);
        }

        if cfg.project_velocity {
            next.v = mechanics::project_to_distribution(sys, cs, &next.q, &next.v)?;
        }
        traj.max_constraint_drift = traj.max_constraint_drift.max(drift(cs, &next.q, &next.v));
        traj.states.push(next.clone());
        state = next;
    }
    Ok(traj)
}

fn drift(cs: &dyn ConstraintSet, q: &Vector, v: &Vector) -> f64 {
    if cs.count() == 0 {
        0.0
    } else {
        (cs.one_forms(q) * v).amax()
    }
}

/// Second initial point for the discrete integrator from an initial
/// velocity: the oracle is run over one step `h` (with substeps no longer
/// than `cfg.h_fine`) and its endpoint is projected onto the discrete
/// constraint space.
pub fn second_point_from_velocity(
    model: &Model,
    q0: &Vector,
    v0: &Vector,
    h: f64,
    cfg: &OracleConfig,
) -> Result<Vector> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "h".to_string(),
            reason: format!("step size must be positive and finite, got {h}"),
        });
    }
    let substeps = (h / cfg.h_fine).ceil().max(1.0);
    let fine = OracleConfig {
        h_fine: h / substeps,
        ..*cfg
    };
    let start = ContinuousState {
        t: 0.0,
        q: q0.clone(),
        v: v0.clone(),
    };
    let traj = integrate_continuous(model, &start, h, &fine)?;
    if !traj.events.is_empty() {
        return Err(Error::Precondition(
            "the first step already reaches the boundary".to_string(),
        ));
    }
    project_to_discrete_constraint(
        model.constraints.as_ref(),
        q0,
        &traj.final_state().q,
        &cfg.solver.newton,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_particle_in_disk, make_rolling_disk, RollingDisk};

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

    #[test]
    fn disk_acceleration_matches_the_arc() {
        let model = make_rolling_disk(1.0, 1.0, 1.0, 1.0, 3.0).unwrap();
        let disk = unit_disk();
        let q = v(&[0.2, -0.1, 0.3, 0.7]);
        let (omega, turn) = (1.5, -0.8);
        let (a, lambda) = lda_acceleration(
            model.system.as_ref(),
            model.constraints.as_ref(),
            &q,
            &disk.velocity(&q, omega, turn),
        )
        .unwrap();
        let expected = v(&[
            -omega * turn * q[3].sin(),
            omega * turn * q[3].cos(),
            0.0,
            0.0,
        ]);
        assert!((a - expected).amax() < 1e-12);
        assert_eq!(lambda.len(), 2);
    }

    #[test]
    fn rk4_is_fourth_order_on_the_arc() {
        let model = make_rolling_disk(1.0, 1.0, 1.0, 1.0, 30.0).unwrap();
        let disk = unit_disk();
        let q0 = v(&[0.0, 0.0, 0.0, 0.2]);
        let (omega, turn) = (2.0, 3.0);
        let exact = disk.arc(&q0, omega, turn, 1.0);
        let error = |h_fine: f64| {
            let cfg = OracleConfig {
                h_fine,
                ..OracleConfig::default()
            };
            let start = ContinuousState {
                t: 0.0,
                q: q0.clone(),
                v: disk.velocity(&q0, omega, turn),
            };
            let traj = integrate_continuous(&model, &start, 1.0, &cfg).unwrap();
            (&traj.final_state().q - &exact).amax()
        };
        let ratio = error(0.04) / error(0.02);
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn bisection_finds_a_linear_root() {
        let t = locate_impact(|t| t - 0.3, 0.0, 1.0).unwrap();
        assert!((t - 0.3).abs() < 1e-12);
        assert!(matches!(
            locate_impact(|t| t + 1.0, 0.0, 1.0),
            Err(Error::InvalidBracket { .. })
        ));
    }

    #[test]
    fn billiard_round_trip() {
        let model = make_particle_in_disk(1.0, 1.0).unwrap();
        let cfg = OracleConfig {
            h_fine: 1e-3,
            ..OracleConfig::default()
        };
        let start = ContinuousState {
            t: 0.0,
            q: v(&[0.0, 0.0]),
            v: v(&[1.0, 0.0]),
        };
        let traj = integrate_continuous(&model, &start, 2.0, &cfg).unwrap();
        assert_eq!(traj.events.len(), 1);
        assert!((traj.events[0].t - 1.0).abs() < 1e-10);
        let last = traj.final_state();
        assert!((last.t - 2.0).abs() < 1e-12);
        assert!(last.q.amax() < 1e-9);
        assert!((&last.v - v(&[-1.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn disk_impact_time_matches_the_closed_form() {
        let model = make_rolling_disk(1.0, 1.0, 1.0, 1.0, 3.0).unwrap();
        let disk = unit_disk();
        let q0 = v(&[0.0, 0.0, 0.0, 0.3]);
        let (omega, turn) = (1.0, 0.2);
        let t_hit = disk.first_edge_contact(&q0, omega, turn, 3.0, 1.0).unwrap();
        let start = ContinuousState {
            t: 0.0,
            q: q0.clone(),
            v: disk.velocity(&q0, omega, turn),
        };
        let traj =
            integrate_continuous(&model, &start, t_hit + 0.1, &OracleConfig::default()).unwrap();
        assert_eq!(traj.events.len(), 1);
        let event = &traj.events[0];
        assert_eq!(event.constraint_label, "C+");
        assert!((event.t - t_hit).abs() < 1e-10, "{} vs {t_hit}", event.t);
        assert!((event.energy_after - event.energy_before).abs() < 1e-8);
        assert!(traj.max_constraint_drift < 1e-8);
    }

    #[test]
    fn second_point_is_discretely_admissible() {
        let model = make_rolling_disk(1.0, 1.0, 1.0, 1.0, 3.0).unwrap();
        let disk = unit_disk();
        let q0 = v(&[0.0, 0.0, 0.0, 0.3]);
        let h = 0.01;
        let q1 = second_point_from_velocity(
            &model,
            &q0,
            &disk.velocity(&q0, 1.0, 0.2),
            h,
            &OracleConfig::default(),
        )
        .unwrap();
        assert!(model.constraints.discrete(&q0, &q1).amax() <= 1e-10);
        assert!((q1 - disk.arc(&q0, 1.0, 0.2, h)).amax() < 1e-6);
    }

    #[test]
    fn rejects_inadmissible_initial_state() {
        let model = make_particle_in_disk(1.0, 1.0).unwrap();
        let start = ContinuousState {
            t: 0.0,
            q: v(&[2.0, 0.0]),
            v: v(&[1.0, 0.0]),
        };
        assert!(integrate_continuous(&model, &start, 1.0, &OracleConfig::default()).is_err());
    }
}
