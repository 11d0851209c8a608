//! Discrete Lagrange-d'Alembert integration.
//!
//! An interior step solves, for `(q_next, lambda)`,
//!
//! ```text
//! D2 Ld(q_prev, q_curr, h_prev) + D1 Ld(q_curr, q_next, h) = mu(q_curr)^T lambda
//! mu_d(q_curr, q_next) = 0
//! ```
//!
//! [`integrate`] advances with this step until a proposed point leaves the
//! admissible set, then hands over to the three impact stages in
//! [`crate::impact`] and splices the impact point into the trajectory.

use serde::{Deserialize, Serialize};

use crate::catalog::Model;
use crate::error::{Error, Result};
use crate::impact::{self, ImpactRecord};
use crate::mechanics::{self, check_vector, ConstraintSet, InequalityConstraint, MechanicalSystem};
use crate::numerics::{
    fd_derivative, fd_gradient, fd_jacobian, newton_solve, NewtonConfig, SolveReport,
};
use crate::{Matrix, Vector};

/// A discrete Lagrangian `Ld(q0, q1, h)` and its slot derivatives.
///
/// Only [`value`](DiscreteLagrangian::value) is required; every derivative
/// falls back to central differences.
pub trait DiscreteLagrangian: Send + Sync {
    fn value(&self, q0: &Vector, q1: &Vector, h: f64) -> f64;

    fn d1(&self, q0: &Vector, q1: &Vector, h: f64) -> Vector {
        fd_gradient(|y| self.value(y, q1, h), q0).unwrap_or_else(|_| nan(q0.len()))
    }

    fn d2(&self, q0: &Vector, q1: &Vector, h: f64) -> Vector {
        fd_gradient(|y| self.value(q0, y, h), q1).unwrap_or_else(|_| nan(q1.len()))
    }

    fn d3(&self, q0: &Vector, q1: &Vector, h: f64) -> f64 {
        fd_derivative(|s| Vector::from_element(1, self.value(q0, q1, s)), h)
            .map(|d| d[0])
            .unwrap_or(f64::NAN)
    }

    /// `d(D1 Ld)/d q1`.
    fn d1_jacobian_q1(&self, q0: &Vector, q1: &Vector, h: f64) -> Matrix {
        fd_jacobian(|y| self.d1(q0, y, h), q1)
            .unwrap_or_else(|_| Matrix::from_element(q0.len(), q1.len(), f64::NAN))
    }

    /// `d(D1 Ld)/dh`.
    fn d1_rate_h(&self, q0: &Vector, q1: &Vector, h: f64) -> Vector {
        fd_derivative(|s| self.d1(q0, q1, s), h).unwrap_or_else(|_| nan(q0.len()))
    }

    /// `d(D3 Ld)/d q1`.
    fn d3_gradient_q1(&self, q0: &Vector, q1: &Vector, h: f64) -> Vector {
        fd_gradient(|y| self.d3(q0, y, h), q1).unwrap_or_else(|_| nan(q1.len()))
    }
}

fn nan(n: usize) -> Vector {
    Vector::from_element(n, f64::NAN)
}

/// `Ld = (1/2h) (q1 - q0)^T M (q1 - q0)` for a constant mass matrix `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDiscreteLagrangian {
    pub mass: Matrix,
}

impl DiscreteLagrangian for QuadraticDiscreteLagrangian {
    fn value(&self, q0: &Vector, q1: &Vector, h: f64) -> f64 {
        let dq = q1 - q0;
        dq.dot(&(&self.mass * &dq)) / (2.0 * h)
    }

    fn d1(&self, q0: &Vector, q1: &Vector, h: f64) -> Vector {
        -(&self.mass * (q1 - q0)) / h
    }

    fn d2(&self, q0: &Vector, q1: &Vector, h: f64) -> Vector {
        (&self.mass * (q1 - q0)) / h
    }

    fn d3(&self, q0: &Vector, q1: &Vector, h: f64) -> f64 {
        let dq = q1 - q0;
        -dq.dot(&(&self.mass * &dq)) / (2.0 * h * h)
    }

    fn d1_jacobian_q1(&self, _q0: &Vector, _q1: &Vector, h: f64) -> Matrix {
        -&self.mass / h
    }

    fn d1_rate_h(&self, q0: &Vector, q1: &Vector, h: f64) -> Vector {
        (&self.mass * (q1 - q0)) / (h * h)
    }

    fn d3_gradient_q1(&self, q0: &Vector, q1: &Vector, h: f64) -> Vector {
        -(&self.mass * (q1 - q0)) / (h * h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperConfig {
    pub newton: NewtonConfig,
    /// `|g| <= boundary_tolerance` counts as on the boundary; `g` above it is
    /// a violation.
    pub boundary_tolerance: f64,
    /// Slack for constraint preconditions on inputs (`mu_d` of a given pair,
    /// `mu v` of a given velocity).
    pub constraint_tolerance: f64,
    /// Normal velocities below this are treated as grazing.
    pub grazing_tolerance: f64,
    /// Impact fractions must lie in `(alpha_margin, 1 - alpha_margin)`.
    pub alpha_margin: f64,
    /// Maximum number of impacts resolved back to back without an
    /// intervening interior step.
    pub max_chained_impacts: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            newton: NewtonConfig::default(),
            boundary_tolerance: 1e-9,
            constraint_tolerance: 1e-8,
            grazing_tolerance: 1e-9,
            alpha_margin: 1e-6,
            max_chained_impacts: 3,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        self.newton.validate()?;
        let positive = [
            ("boundary_tolerance", self.boundary_tolerance),
            ("constraint_tolerance", self.constraint_tolerance),
            ("grazing_tolerance", self.grazing_tolerance),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: name.to_string(),
                    reason: "must be positive and finite".to_string(),
                });
            }
        }
        if !(self.alpha_margin > 0.0 && self.alpha_margin < 0.5) {
            return Err(Error::InvalidParameter {
                name: "alpha_margin".to_string(),
                reason: "must lie in (0, 0.5)".to_string(),
            });
        }
        Ok(())
    }
}

/// How a point of a [`DiscreteTrajectory`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    /// One of the two initial points.
    Initial,
    /// Interior discrete Lagrange-d'Alembert step.
    Interior,
    /// Impact point on the boundary (stage 1).
    Impact,
    /// First point after an impact (stage 2).
    PostImpact,
    /// Second point after an impact (stage 3).
    Resumed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteTrajectory {
    pub step_size: f64,
    pub times: Vec<f64>,
    pub points: Vec<Vector>,
    /// Multipliers of the equation that produced each point; `None` for the
    /// initial points. For a post-impact point these are the constraint
    /// reaction multipliers `nu` of the jump.
    pub multipliers: Vec<Option<Vector>>,
    pub kinds: Vec<PointKind>,
    /// Energy estimate from the discrete velocity of the interval ending at
    /// each point (the first interval for point 0).
    pub energies: Vec<f64>,
    pub impacts: Vec<ImpactRecord>,
}

impl DiscreteTrajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&Vector> {
        self.points.last()
    }

    fn push(&mut self, t: f64, q: Vector, lambda: Option<Vector>, kind: PointKind) {
        self.times.push(t);
        self.points.push(q);
        self.multipliers.push(lambda);
        self.kinds.push(kind);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub q_next: Vector,
    pub multipliers: Vector,
    pub report: SolveReport,
}

/// Energy estimate `E_L` at the midpoint of `(qa, qb)` with velocity
/// `(qb - qa) / dt`.
pub fn discrete_energy(
    sys: &dyn MechanicalSystem,
    qa: &Vector,
    qb: &Vector,
    dt: f64,
) -> Result<f64> {
    let mid = (qa + qb) * 0.5;
    mechanics::energy(sys, &mid, &((qb - qa) / dt))
}

/// Residual of one interior step, stacked as (momentum balance, discrete
/// constraint).
#[allow(clippy::too_many_arguments)]
pub fn step_residual(
    model: &Model,
    q_prev: &Vector,
    q_curr: &Vector,
    q_next: &Vector,
    h_prev: f64,
    h: f64,
    mu_curr: &Matrix,
    lambda: &Vector,
) -> (Vector, Vector) {
    let ld = model.lagrangian.as_ref();
    let momentum =
        ld.d2(q_prev, q_curr, h_prev) + ld.d1(q_curr, q_next, h) - mu_curr.transpose() * lambda;
    let constraint = model.constraints.discrete(q_curr, q_next);
    (momentum, constraint)
}

/// One discrete Lagrange-d'Alembert step with uniform step size `h`.
pub fn dla_step(
    model: &Model,
    q_prev: &Vector,
    q_curr: &Vector,
    h: f64,
    cfg: &StepperConfig,
) -> Result<StepSolution> {
    dla_step_with_steps(model, q_prev, q_curr, h, h, cfg)
}

/// One discrete Lagrange-d'Alembert step where the interval `(q_prev,
/// q_curr)` has length `h_prev` and the new interval has length `h`.
pub fn dla_step_with_steps(
    model: &Model,
    q_prev: &Vector,
    q_curr: &Vector,
    h_prev: f64,
    h: f64,
    cfg: &StepperConfig,
) -> Result<StepSolution> {
    let n = model.dim();
    check_vector("previous configuration", q_prev, n)?;
    check_vector("current configuration", q_curr, n)?;
    check_step("h", h)?;
    check_step("h_prev", h_prev)?;
    let cs = model.constraints.as_ref();
    let m = cs.count();
    let pre = cs.discrete(q_prev, q_curr);
    if !pre.is_empty() && !(pre.amax() <= cfg.constraint_tolerance) {
        return Err(Error::Precondition(format!(
            "(q_prev, q_curr) violates the discrete constraint by {:.3e}",
            pre.amax()
        )));
    }
    let mu = mechanics::constraint_matrix(cs, q_curr)?;
    let ld = model.lagrangian.as_ref();
    let momentum_in = ld.d2(q_prev, q_curr, h_prev);

    let residual = |z: &Vector| {
        let q_next = z.rows(0, n).into_owned();
        let lambda = z.rows(n, m);
        let mut r = Vector::zeros(n + m);
        r.rows_mut(0, n)
            .copy_from(&(&momentum_in + ld.d1(q_curr, &q_next, h) - mu.transpose() * lambda));
        r.rows_mut(n, m).copy_from(&cs.discrete(q_curr, &q_next));
        r
    };
    let jacobian = |z: &Vector| {
        let q_next = z.rows(0, n).into_owned();
        let mut j = Matrix::zeros(n + m, n + m);
        j.view_mut((0, 0), (n, n))
            .copy_from(&ld.d1_jacobian_q1(q_curr, &q_next, h));
        j.view_mut((0, n), (n, m)).copy_from(&(-mu.transpose()));
        j.view_mut((n, 0), (m, n))
            .copy_from(&cs.discrete_jacobian_q1(q_curr, &q_next));
        j
    };

    // Linear extrapolation, exact for free flight.
    let mut z0 = Vector::zeros(n + m);
    z0.rows_mut(0, n)
        .copy_from(&(q_curr + (q_curr - q_prev) * (h / h_prev)));
    let report = newton_solve(residual, jacobian, &z0, &cfg.newton)?;
    Ok(StepSolution {
        q_next: report.solution.rows(0, n).into_owned(),
        multipliers: report.solution.rows(n, m).into_owned(),
        report,
    })
}

/// Closest point to `q1_guess` (to first order) with `mu_d(q0, q1) = 0`,
/// by minimum-norm Gauss-Newton corrections.
pub fn project_to_discrete_constraint(
    cs: &dyn ConstraintSet,
    q0: &Vector,
    q1_guess: &Vector,
    cfg: &NewtonConfig,
) -> Result<Vector> {
    let mut q1 = q1_guess.clone();
    if cs.count() == 0 {
        return Ok(q1);
    }
    let mut history = Vec::new();
    for _ in 0..cfg.max_iterations {
        let r = cs.discrete(q0, &q1);
        history.push(r.amax());
        if r.amax() <= cfg.residual_tolerance {
            return Ok(q1);
        }
        let jac = cs.discrete_jacobian_q1(q0, &q1);
        let normal = &jac * jac.transpose();
        let y = normal.lu().solve(&r).ok_or(Error::RankDeficient {
            rank: crate::numerics::numerical_rank(&jac, 1e-10),
            expected: cs.count(),
        })?;
        q1 -= jac.transpose() * y;
    }
    Err(Error::Newton {
        failure: crate::error::NewtonFailure::MaxIterations,
        iterations: cfg.max_iterations,
        residual_history: history,
    })
}

fn check_step(name: &str, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter {
            name: name.to_string(),
            reason: format!("step size must be positive and finite, got {h}"),
        });
    }
    Ok(())
}

/// Index and gap of every inequality constraint violated at `q`.
fn violations(
    boundaries: &[std::sync::Arc<dyn InequalityConstraint>],
    q: &Vector,
    tol: f64,
) -> Vec<(usize, f64)> {
    boundaries
        .iter()
        .enumerate()
        .map(|(i, ic)| (i, ic.gap(q)))
        .filter(|&(_, g)| !(g <= tol))
        .collect()
}

/// Integrates `steps` intervals of length `h` from the initial pair
/// `(q0, q1)`, resolving boundary impacts with the three-stage scheme.
///
/// Impact points are spliced into the trajectory between grid points, so a
/// trajectory with impacts has more than `steps + 1` points; the last point
/// always sits at `t = steps * h`.
pub fn integrate(
    model: &Model,
    q0: &Vector,
    q1: &Vector,
    h: f64,
    steps: usize,
    cfg: &StepperConfig,
) -> Result<DiscreteTrajectory> {
    cfg.validate()?;
    let n = model.dim();
    check_vector("q0", q0, n)?;
    check_vector("q1", q1, n)?;
    check_step("h", h)?;
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "steps".to_string(),
            reason: "must be at least 1".to_string(),
        });
    }
    let pre = model.constraints.discrete(q0, q1);
    if !pre.is_empty() && !(pre.amax() <= cfg.constraint_tolerance) {
        return Err(Error::Precondition(format!(
            "(q0, q1) violates the discrete constraint by {:.3e}",
            pre.amax()
        )));
    }
    for (label, q) in [("q0", q0), ("q1", q1)] {
        if let Some(&(i, g)) = violations(&model.boundaries, q, cfg.boundary_tolerance).first() {
            return Err(Error::Precondition(format!(
                "{label} is not admissible: {} has g = {g:.6e}",
                model.boundaries[i].label()
            )));
        }
    }

    let mut traj = DiscreteTrajectory {
        step_size: h,
        times: Vec::with_capacity(steps + 1),
        points: Vec::with_capacity(steps + 1),
        multipliers: Vec::with_capacity(steps + 1),
        kinds: Vec::with_capacity(steps + 1),
        energies: Vec::new(),
        impacts: Vec::new(),
    };
    traj.push(0.0, q0.clone(), None, PointKind::Initial);
    traj.push(h, q1.clone(), None, PointKind::Initial);

    let mut grid = 1usize;
    let mut h_prev = h;
    let mut chained = 0usize;
    // Grid times are computed from the index so they do not accumulate
    // rounding error.
    let time = |j: usize| j as f64 * h;

    while grid < steps {
        let k = traj.len() - 1;
        let t_curr = time(grid);
        let q_prev = traj.points[k - 1].clone();
        let q_curr = traj.points[k].clone();

        let proposal = dla_step_with_steps(model, &q_prev, &q_curr, h_prev, h, cfg)
            .map_err(|e| e.at_step(grid + 1, time(grid + 1)))?;
        let violated = violations(&model.boundaries, &proposal.q_next, cfg.boundary_tolerance);
        if violated.is_empty() {
            traj.push(
                time(grid + 1),
                proposal.q_next,
                Some(proposal.multipliers),
                PointKind::Interior,
            );
            grid += 1;
            h_prev = h;
            chained = 0;
            continue;
        }
        if violated.len() > 1 {
            return Err(Error::SimultaneousViolation {
                labels: violated
                    .iter()
                    .map(|&(i, _)| model.boundaries[i].label().to_string())
                    .collect(),
            }
            .at_step(grid + 1, time(grid + 1)));
        }
        chained += 1;
        if chained > cfg.max_chained_impacts {
            return Err(Error::ChainedImpacts {
                limit: cfg.max_chained_impacts,
            }
            .at_step(grid + 1, time(grid + 1)));
        }

        let ic = model.boundaries[violated[0].0].as_ref();
        let lambda_curr = traj.multipliers[k].clone();
        let resolved = resolve_impact(
            model,
            ic,
            &q_prev,
            &q_curr,
            lambda_curr,
            h_prev,
            h,
            t_curr,
            cfg,
        )
        .map_err(|e| e.at_step(grid + 1, time(grid + 1)))?;
        let mut record = resolved;

        if record.grid_aligned {
            traj.kinds[k] = PointKind::Impact;
            record.index = k;
        } else {
            record.index = traj.len();
            traj.push(
                record.t_bar,
                record.q_bar.clone(),
                Some(record.lambda_stage1.clone()),
                PointKind::Impact,
            );
        }
        traj.push(
            time(grid + 1),
            record.q_post.clone(),
            Some(record.nu.clone()),
            PointKind::PostImpact,
        );
        grid += 1;

        // Any violation by the resumed point is resolved as a chained impact
        // on the next pass, which recomputes the same step.
        let resumed_ok =
            violations(&model.boundaries, &record.q_resume, cfg.boundary_tolerance).is_empty();
        record.chained = !resumed_ok;
        if resumed_ok && grid < steps {
            traj.push(
                time(grid + 1),
                record.q_resume.clone(),
                Some(record.lambda_stage3.clone()),
                PointKind::Resumed,
            );
            grid += 1;
            h_prev = h;
            chained = 0;
        } else {
            h_prev = record.h_out;
        }
        traj.impacts.push(record);
    }

    let sys = model.system.as_ref();
    let mut energies = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let (a, b) = if k == 0 { (0, 1) } else { (k - 1, k) };
        let dt = traj.times[b] - traj.times[a];
        energies.push(discrete_energy(sys, &traj.points[a], &traj.points[b], dt)?);
    }
    traj.energies = energies;
    Ok(traj)
}

/// Runs the three impact stages for a step from `(q_prev, q_curr)` whose
/// continuation violates `ic`.
#[allow(clippy::too_many_arguments)]
fn resolve_impact(
    model: &Model,
    ic: &dyn InequalityConstraint,
    q_prev: &Vector,
    q_curr: &Vector,
    lambda_curr: Option<Vector>,
    h_prev: f64,
    h: f64,
    t_curr: f64,
    cfg: &StepperConfig,
) -> Result<ImpactRecord> {
    let sys = model.system.as_ref();
    let m = model.constraints.count();
    let g_curr = ic.gap(q_curr);
    let grid_aligned = g_curr.abs() <= cfg.boundary_tolerance;

    // A grid-aligned impact happens at q_curr itself: the incoming interval
    // is the previous step and the outgoing interval is a full step.
    let (q_in, q_bar, h_in, h_out, alpha, lambda_stage1, stage1_residual) = if grid_aligned {
        let lambda = lambda_curr.unwrap_or_else(|| Vector::zeros(m));
        (q_prev.clone(), q_curr.clone(), h_prev, h, 1.0, lambda, 0.0)
    } else {
        let loc = impact::localize_with_steps(model, ic, q_prev, q_curr, h_prev, h, cfg)?;
        (
            q_curr.clone(),
            loc.q_bar,
            loc.alpha * h,
            (1.0 - loc.alpha) * h,
            loc.alpha,
            loc.multipliers,
            loc.residual,
        )
    };

    let jump = impact::jump_with_steps(model, ic, &q_in, &q_bar, h_in, h_out, cfg)?;
    for other in &model.boundaries {
        let g = other.gap(&jump.q_post);
        if !(g <= cfg.boundary_tolerance) {
            return Err(Error::PostImpactViolation {
                label: other.label().to_string(),
                gap: g,
            });
        }
    }
    let resume = dla_step_with_steps(model, &q_bar, &jump.q_post, h_out, h, cfg)?;
    let mu_post = mechanics::constraint_matrix(model.constraints.as_ref(), &jump.q_post)?;
    let (r_mom, r_con) = step_residual(
        model,
        &q_bar,
        &jump.q_post,
        &resume.q_next,
        h_out,
        h,
        &mu_post,
        &resume.multipliers,
    );
    let stage3_residual = r_mom
        .amax()
        .max(if !r_con.is_empty() { r_con.amax() } else { 0.0 });

    let energy_before = discrete_energy(sys, q_prev, q_curr, h_prev)?;
    let energy_after = discrete_energy(sys, &jump.q_post, &resume.q_next, h)?;

    Ok(ImpactRecord {
        index: 0,
        constraint_label: ic.label().to_string(),
        t_bar: if grid_aligned {
            t_curr
        } else {
            t_curr + alpha * h
        },
        alpha,
        grid_aligned,
        h,
        h_prev,
        h_in,
        h_out,
        gap: ic.gap(&q_bar),
        q_prev: q_prev.clone(),
        q_in,
        q_bar,
        q_post: jump.q_post,
        q_resume: resume.q_next,
        lambda_stage1,
        lambda_bar: jump.lambda_bar,
        nu: jump.nu,
        lambda_stage3: resume.multipliers,
        stage1_residual,
        momentum_residual: jump.momentum_residual,
        discrete_energy_residual: jump.discrete_energy_residual,
        jump_constraint_residual: jump.constraint_residual,
        stage3_residual,
        physical_energy_before: energy_before,
        physical_energy_after: energy_after,
        chained: false,
    })
}
