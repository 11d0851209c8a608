//! Impact resolution.
//!
//! Momentum jumps are parametrized as `-lambda_bar dg(q) + mu(q)^T nu` with
//! `lambda_bar >= 0`: a normal impulse pointing into the admissible set plus
//! a reaction impulse in the annihilator of the distribution. Both the
//! continuous jump and the discrete impact stage use this decomposition.
//!
//! The discrete impact is resolved in three stages for an impact inside the
//! interval `(q_{i-1}, q_i)`:
//!
//! 1. [`impact_stage_localize`] finds the boundary point `q_bar` and the
//!    fraction `alpha` of the step at which it is reached,
//! 2. [`impact_stage_jump`] finds the post-impact point `q_i` from the
//!    momentum decomposition and equality of the `D3 Ld` terms on both
//!    sides of the impact,
//! 3. [`impact_stage_resume`] takes one step of length `h` from
//!    `(q_bar, q_i)` to restore the uniform grid.

use serde::Serialize;

use crate::catalog::Model;
use crate::error::{Error, Result};
use crate::mechanics::{
    self, check_vector, ConstraintGeometry, ConstraintSet, InequalityConstraint, MechanicalSystem,
};
use crate::numerics::{newton_solve, SolveReport};
use crate::stepper::{dla_step_with_steps, step_residual, StepSolution, StepperConfig};
use crate::{Matrix, Vector};

/// Post-impact velocity from the continuous jump conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSolution {
    pub v_plus: Vector,
    pub lambda_bar: f64,
    pub nu: Vector,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `|M (v_plus - v_minus) + lambda_bar dg - mu^T nu|_inf`.
    pub decomposition_residual: f64,
    pub report: SolveReport,
}

/// Closed-form energy-conserving reflection inside `D_q`.
///
/// With `w` the M-orthogonal projection of `M^-1 dg` onto `D_q`, every
/// post-velocity in `D_q` with a jump of the form `-lambda dg + mu^T nu` is
/// `v - lambda w`, and energy is conserved for `lambda = 0` or
/// `lambda = 2 (dg . v) / (dg . w)`. This is the Newton seed.
struct Reflection {
    v_plus: Vector,
    lambda_bar: f64,
    nu: Vector,
}

fn reflect(geom: &ConstraintGeometry, dg: &Vector, v: &Vector) -> Reflection {
    let w = geom.project(&(&geom.mass_inv * dg));
    let normal = dg.dot(v);
    let stiffness = dg.dot(&w);
    let lambda_bar = if stiffness > 0.0 {
        (2.0 * normal / stiffness).max(0.0)
    } else {
        0.0
    };
    Reflection {
        v_plus: v - lambda_bar * &w,
        lambda_bar,
        nu: lambda_bar * geom.reaction_multipliers(dg),
    }
}

/// Solves the continuous jump conditions at a boundary point `q` for an
/// incoming velocity `v_minus` in `D_q`:
///
/// ```text
/// M (v_plus - v_minus) = -lambda_bar dg(q) + mu(q)^T nu,  lambda_bar >= 0
/// E_L(q, v_plus) = E_L(q, v_minus)
/// mu(q) v_plus = 0
/// ```
///
/// The trivial root `v_plus = v_minus` is excluded by seeding Newton at the
/// reflection and requiring `dg . v_plus <= 0` afterwards.
pub fn continuous_jump(
    sys: &dyn MechanicalSystem,
    cs: &dyn ConstraintSet,
    ic: &dyn InequalityConstraint,
    q: &Vector,
    v_minus: &Vector,
    cfg: &StepperConfig,
) -> Result<JumpSolution> {
    let n = sys.dim();
    check_vector("configuration", q, n)?;
    check_vector("incoming velocity", v_minus, n)?;
    let (g, _) = mechanics::gap_and_gradient(ic, q)?;
    if !(g.abs() <= cfg.boundary_tolerance) {
        return Err(Error::Precondition(format!(
            "jump requires a boundary point of {}, got g = {g:.6e}",
            ic.label()
        )));
    }
    let dg = mechanics::boundary_gradient(ic, q)?;
    let geom = ConstraintGeometry::new(sys, cs, q)?;
    let m = geom.mu.nrows();
    let drift = &geom.mu * v_minus;
    if m > 0 && !(drift.amax() <= cfg.constraint_tolerance) {
        return Err(Error::Precondition(format!(
            "incoming velocity leaves the distribution: |mu v| = {:.3e}",
            drift.amax()
        )));
    }
    let normal = dg.dot(v_minus);
    if normal.abs() < cfg.grazing_tolerance {
        return Err(Error::Grazing {
            label: ic.label().to_string(),
            normal_velocity: normal,
        });
    }
    if normal < 0.0 {
        return Err(Error::Precondition(format!(
            "velocity is leaving the boundary of {} (dg . v = {normal:.3e})",
            ic.label()
        )));
    }

    let mass = &geom.mass;
    let mu = &geom.mu;
    let p_minus = mass * v_minus;
    let kinetic_minus = 0.5 * v_minus.dot(&p_minus);
    let residual = |z: &Vector| {
        let v = z.rows(0, n);
        let lambda_bar = z[n];
        let nu = z.rows(n + 1, m);
        let mut r = Vector::zeros(n + 1 + m);
        r.rows_mut(0, n)
            .copy_from(&(mass * v - &p_minus + lambda_bar * &dg - mu.transpose() * nu));
        r[n] = 0.5 * v.dot(&(mass * v)) - kinetic_minus;
        r.rows_mut(n + 1, m).copy_from(&(mu * v));
        r
    };
    let jacobian = |z: &Vector| {
        let v = z.rows(0, n);
        let mut j = Matrix::zeros(n + 1 + m, n + 1 + m);
        j.view_mut((0, 0), (n, n)).copy_from(mass);
        j.view_mut((0, n), (n, 1)).copy_from(&dg);
        j.view_mut((0, n + 1), (n, m)).copy_from(&(-mu.transpose()));
        j.view_mut((n, 0), (1, n))
            .copy_from(&(mass * v).transpose());
        j.view_mut((n + 1, 0), (m, n)).copy_from(mu);
        j
    };

    let seed = reflect(&geom, &dg, v_minus);
    let mut z0 = Vector::zeros(n + 1 + m);
    z0.rows_mut(0, n).copy_from(&seed.v_plus);
    z0[n] = seed.lambda_bar;
    z0.rows_mut(n + 1, m).copy_from(&seed.nu);
    let report = newton_solve(residual, jacobian, &z0, &cfg.newton)?;

    let v_plus = report.solution.rows(0, n).into_owned();
    let lambda_bar = report.solution[n];
    let nu = report.solution.rows(n + 1, m).into_owned();
    if lambda_bar < 0.0 {
        return Err(Error::InadmissibleImpact {
            label: ic.label().to_string(),
            lambda_bar,
        });
    }
    let outgoing = dg.dot(&v_plus);
    if outgoing > cfg.grazing_tolerance {
        return Err(Error::Precondition(format!(
            "no admissible post-impact velocity: dg . v_plus = {outgoing:.3e}"
        )));
    }
    let decomposition_residual =
        (mass * (&v_plus - v_minus) + lambda_bar * &dg - mu.transpose() * &nu).amax();
    Ok(JumpSolution {
        energy_before: mechanics::energy(sys, q, v_minus)?,
        energy_after: mechanics::energy(sys, q, &v_plus)?,
        v_plus,
        lambda_bar,
        nu,
        decomposition_residual,
        report,
    })
}

/// Result of the first impact stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Localized {
    pub q_bar: Vector,
    pub alpha: f64,
    pub multipliers: Vector,
    /// Max-norm of the stage residual at the solution.
    pub residual: f64,
    pub report: SolveReport,
}

/// Stage-1 residual, stacked as (momentum balance at `q_im1`, `g(q_bar)`,
/// `mu_d(q_im1, q_bar)`).
#[allow(clippy::too_many_arguments)]
pub fn localize_residual(
    model: &Model,
    ic: &dyn InequalityConstraint,
    q_im2: &Vector,
    q_im1: &Vector,
    h_prev: f64,
    h: f64,
    q_bar: &Vector,
    alpha: f64,
    lambda: &Vector,
) -> Vector {
    let ld = model.lagrangian.as_ref();
    let mu = model.constraints.one_forms(q_im1);
    let n = q_bar.len();
    let m = lambda.len();
    let mut r = Vector::zeros(n + 1 + m);
    r.rows_mut(0, n).copy_from(
        &(ld.d2(q_im2, q_im1, h_prev) + ld.d1(q_im1, q_bar, alpha * h) - mu.transpose() * lambda),
    );
    r[n] = ic.gap(q_bar);
    r.rows_mut(n + 1, m)
        .copy_from(&model.constraints.discrete(q_im1, q_bar));
    r
}

/// Stage 1 with a uniform grid: `q_im2, q_im1` are `h` apart.
pub fn impact_stage_localize(
    model: &Model,
    ic: &dyn InequalityConstraint,
    q_im2: &Vector,
    q_im1: &Vector,
    h: f64,
    cfg: &StepperConfig,
) -> Result<Localized> {
    localize_with_steps(model, ic, q_im2, q_im1, h, h, cfg)
}

/// Stage 1: solves for `(q_bar, alpha, lambda)` in
///
/// ```text
/// D2 Ld(q_im2, q_im1, h_prev) + D1 Ld(q_im1, q_bar, alpha h) = mu(q_im1)^T lambda
/// g(q_bar) = 0
/// mu_d(q_im1, q_bar) = 0
/// ```
pub fn localize_with_steps(
    model: &Model,
    ic: &dyn InequalityConstraint,
    q_im2: &Vector,
    q_im1: &Vector,
    h_prev: f64,
    h: f64,
    cfg: &StepperConfig,
) -> Result<Localized> {
    let n = model.dim();
    check_vector("q_{i-2}", q_im2, n)?;
    check_vector("q_{i-1}", q_im1, n)?;
    for (name, value) in [("h", h), ("h_prev", h_prev)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter {
                name: name.to_string(),
                reason: format!("step size must be positive and finite, got {value}"),
            });
        }
    }
    let g_start = ic.gap(q_im1);
    if g_start >= -cfg.boundary_tolerance {
        // Starting on (or beyond) the boundary pins alpha to zero.
        return Err(Error::DegenerateAlpha { alpha: 0.0 });
    }

    let cs = model.constraints.as_ref();
    let m = cs.count();
    let mu = mechanics::constraint_matrix(cs, q_im1)?;
    let ld = model.lagrangian.as_ref();
    let momentum_in = ld.d2(q_im2, q_im1, h_prev);

    let residual = |z: &Vector| {
        let q_bar = z.rows(0, n).into_owned();
        let alpha = z[n];
        let lambda = z.rows(n + 1, m);
        let mut r = Vector::zeros(n + 1 + m);
        r.rows_mut(0, n)
            .copy_from(&(&momentum_in + ld.d1(q_im1, &q_bar, alpha * h) - mu.transpose() * lambda));
        r[n] = ic.gap(&q_bar);
        r.rows_mut(n + 1, m).copy_from(&cs.discrete(q_im1, &q_bar));
        r
    };
    let jacobian = |z: &Vector| {
        let q_bar = z.rows(0, n).into_owned();
        let alpha = z[n];
        let mut j = Matrix::zeros(n + 1 + m, n + 1 + m);
        j.view_mut((0, 0), (n, n))
            .copy_from(&ld.d1_jacobian_q1(q_im1, &q_bar, alpha * h));
        j.view_mut((0, n), (n, 1))
            .copy_from(&(h * ld.d1_rate_h(q_im1, &q_bar, alpha * h)));
        j.view_mut((0, n + 1), (n, m)).copy_from(&(-mu.transpose()));
        j.view_mut((n, 0), (1, n))
            .copy_from(&ic.gap_gradient(&q_bar).transpose());
        j.view_mut((n + 1, 0), (m, n))
            .copy_from(&cs.discrete_jacobian_q1(q_im1, &q_bar));
        j
    };

    let direction = (q_im1 - q_im2) * (h / h_prev);
    let alpha0 = secant_crossing(|s| ic.gap(&(q_im1 + s * &direction)), g_start);
    let mut z0 = Vector::zeros(n + 1 + m);
    z0.rows_mut(0, n).copy_from(&(q_im1 + alpha0 * &direction));
    z0[n] = alpha0;
    let report = newton_solve(residual, jacobian, &z0, &cfg.newton)?;

    let alpha = report.solution[n];
    if !(alpha > cfg.alpha_margin && alpha < 1.0 - cfg.alpha_margin) {
        return Err(Error::DegenerateAlpha { alpha });
    }
    Ok(Localized {
        q_bar: report.solution.rows(0, n).into_owned(),
        alpha,
        multipliers: report.solution.rows(n + 1, m).into_owned(),
        residual: report.final_residual_norm,
        report,
    })
}

/// Crossing parameter of `g` along the linear extrapolation `s -> g(s)` on
/// `[0, 1]`, by bracketed secant (Illinois) iteration. Falls back to `0.5`
/// when the extrapolated segment does not cross.
fn secant_crossing<F: Fn(f64) -> f64>(g: F, g0: f64) -> f64 {
    let (mut a, mut ga) = (0.0, g0);
    let (mut b, mut gb) = (1.0, g(1.0));
    if !(gb > 0.0) || !(ga < 0.0) {
        return 0.5;
    }
    let mut side = 0i8;
    let mut s = 0.5;
    for _ in 0..60 {
        s = (a * gb - b * ga) / (gb - ga);
        let gs = g(s);
        if gs.abs() <= 1e-15 || (b - a).abs() <= 1e-15 {
            break;
        }
        if gs > 0.0 {
            b = s;
            gb = gs;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = s;
            ga = gs;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    s
}

/// Result of the second impact stage.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJump {
    pub q_post: Vector,
    pub lambda_bar: f64,
    pub nu: Vector,
    /// Max-norm of the momentum decomposition residual.
    pub momentum_residual: f64,
    /// `|D3 Ld(q_in, q_bar, h_in) - D3 Ld(q_bar, q_post, h_out)|`.
    pub discrete_energy_residual: f64,
    /// Max-norm of `mu_d(q_bar, q_post)`.
    pub constraint_residual: f64,
    /// The incoming discrete velocity was tangent to the boundary; no normal
    /// impulse was applied.
    pub grazing: bool,
}

/// Stage-2 residual blocks: momentum decomposition, `D3` equality and
/// `mu_d(q_bar, q_post)`.
#[allow(clippy::too_many_arguments)]
pub fn jump_residual(
    model: &Model,
    ic: &dyn InequalityConstraint,
    q_in: &Vector,
    q_bar: &Vector,
    h_in: f64,
    h_out: f64,
    q_post: &Vector,
    lambda_bar: f64,
    nu: &Vector,
) -> (Vector, f64, Vector) {
    let ld = model.lagrangian.as_ref();
    let mu = model.constraints.one_forms(q_bar);
    let dg = ic.gap_gradient(q_bar);
    let momentum = ld.d2(q_in, q_bar, h_in) + ld.d1(q_bar, q_post, h_out) - lambda_bar * dg
        + mu.transpose() * nu;
    let energy = ld.d3(q_in, q_bar, h_in) - ld.d3(q_bar, q_post, h_out);
    let constraint = model.constraints.discrete(q_bar, q_post);
    (momentum, energy, constraint)
}

/// Stage 2 with the impact at fraction `alpha` of a uniform step `h`.
pub fn impact_stage_jump(
    model: &Model,
    ic: &dyn InequalityConstraint,
    q_im1: &Vector,
    q_bar: &Vector,
    alpha: f64,
    h: f64,
    cfg: &StepperConfig,
) -> Result<DiscreteJump> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::DegenerateAlpha { alpha });
    }
    jump_with_steps(model, ic, q_im1, q_bar, alpha * h, (1.0 - alpha) * h, cfg)
}

/// Stage 2: solves for `(q_post, lambda_bar, nu)` in
///
/// ```text
/// D2 Ld(q_in, q_bar, h_in) + D1 Ld(q_bar, q_post, h_out) = lambda_bar dg(q_bar) - mu(q_bar)^T nu
/// D3 Ld(q_in, q_bar, h_in) = D3 Ld(q_bar, q_post, h_out)
/// mu_d(q_bar, q_post) = 0
/// ```
///
/// The left-hand side of the first line is minus the jump of the discrete
/// momentum, so `lambda_bar >= 0` is the admissible sign. A root with
/// `lambda_bar < 0` or with `q_post` outside the admissible set is an error.
pub fn jump_with_steps(
    model: &Model,
    ic: &dyn InequalityConstraint,
    q_in: &Vector,
    q_bar: &Vector,
    h_in: f64,
    h_out: f64,
    cfg: &StepperConfig,
) -> Result<DiscreteJump> {
    let n = model.dim();
    check_vector("incoming configuration", q_in, n)?;
    check_vector("impact configuration", q_bar, n)?;
    for (name, value) in [("h_in", h_in), ("h_out", h_out)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter {
                name: name.to_string(),
                reason: format!("interval must be positive and finite, got {value}"),
            });
        }
    }
    let sys = model.system.as_ref();
    let cs = model.constraints.as_ref();
    let ld = model.lagrangian.as_ref();
    let m = cs.count();
    let dg = mechanics::boundary_gradient(ic, q_bar)?;
    let geom = ConstraintGeometry::new(sys, cs, q_bar)?;

    let v_in = geom.project(&((q_bar - q_in) / h_in));
    let normal = dg.dot(&v_in);
    if normal.abs() <= cfg.grazing_tolerance {
        // Tangential arrival: no normal impulse, ordinary step across q_bar.
        let step = dla_step_with_steps(model, q_in, q_bar, h_in, h_out, cfg)?;
        let nu = -step.multipliers;
        let (r_mom, r_energy, r_con) =
            jump_residual(model, ic, q_in, q_bar, h_in, h_out, &step.q_next, 0.0, &nu);
        return Ok(DiscreteJump {
            q_post: step.q_next,
            lambda_bar: 0.0,
            nu,
            momentum_residual: r_mom.amax(),
            discrete_energy_residual: r_energy.abs(),
            constraint_residual: max_abs(&r_con),
            grazing: true,
        });
    }
    if normal < 0.0 {
        return Err(Error::Precondition(format!(
            "incoming discrete velocity leaves the boundary of {} (dg . v = {normal:.3e})",
            ic.label()
        )));
    }

    let mu = &geom.mu;
    let momentum_in = ld.d2(q_in, q_bar, h_in);
    let d3_in = ld.d3(q_in, q_bar, h_in);
    let residual = |z: &Vector| {
        let q_post = z.rows(0, n).into_owned();
        let lambda_bar = z[n];
        let nu = z.rows(n + 1, m);
        let mut r = Vector::zeros(n + 1 + m);
        r.rows_mut(0, n).copy_from(
            &(&momentum_in + ld.d1(q_bar, &q_post, h_out) - lambda_bar * &dg + mu.transpose() * nu),
        );
        r[n] = d3_in - ld.d3(q_bar, &q_post, h_out);
        r.rows_mut(n + 1, m).copy_from(&cs.discrete(q_bar, &q_post));
        r
    };
    let jacobian = |z: &Vector| {
        let q_post = z.rows(0, n).into_owned();
        let mut j = Matrix::zeros(n + 1 + m, n + 1 + m);
        j.view_mut((0, 0), (n, n))
            .copy_from(&ld.d1_jacobian_q1(q_bar, &q_post, h_out));
        j.view_mut((0, n), (n, 1)).copy_from(&(-&dg));
        j.view_mut((0, n + 1), (n, m)).copy_from(&mu.transpose());
        j.view_mut((n, 0), (1, n))
            .copy_from(&(-ld.d3_gradient_q1(q_bar, &q_post, h_out)).transpose());
        j.view_mut((n + 1, 0), (m, n))
            .copy_from(&cs.discrete_jacobian_q1(q_bar, &q_post));
        j
    };

    let seed = reflect(&geom, &dg, &v_in);
    let mut z0 = Vector::zeros(n + 1 + m);
    z0.rows_mut(0, n).copy_from(&(q_bar + h_out * &seed.v_plus));
    z0[n] = seed.lambda_bar;
    z0.rows_mut(n + 1, m).copy_from(&seed.nu);
    let report = newton_solve(residual, jacobian, &z0, &cfg.newton)?;

    let q_post = report.solution.rows(0, n).into_owned();
    let lambda_bar = report.solution[n];
    let nu = report.solution.rows(n + 1, m).into_owned();
    if lambda_bar < 0.0 {
        return Err(Error::InadmissibleImpact {
            label: ic.label().to_string(),
            lambda_bar,
        });
    }
    let gap = ic.gap(&q_post);
    if !(gap <= cfg.boundary_tolerance) {
        return Err(Error::PostImpactViolation {
            label: ic.label().to_string(),
            gap,
        });
    }
    let (r_mom, r_energy, r_con) = jump_residual(
        model, ic, q_in, q_bar, h_in, h_out, &q_post, lambda_bar, &nu,
    );
    Ok(DiscreteJump {
        q_post,
        lambda_bar,
        nu,
        momentum_residual: r_mom.amax(),
        discrete_energy_residual: r_energy.abs(),
        constraint_residual: max_abs(&r_con),
        grazing: false,
    })
}

/// Stage 3: one step of length `h` from `(q_bar, q_post)`, whose interval
/// has length `(1 - alpha) h`.
pub fn impact_stage_resume(
    model: &Model,
    q_bar: &Vector,
    q_post: &Vector,
    alpha: f64,
    h: f64,
    cfg: &StepperConfig,
) -> Result<StepSolution> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::DegenerateAlpha { alpha });
    }
    dla_step_with_steps(model, q_bar, q_post, (1.0 - alpha) * h, h, cfg)
}

fn max_abs(v: &Vector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Everything known about one resolved impact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactRecord {
    /// Index of the impact point in the trajectory.
    pub index: usize,
    pub constraint_label: String,
    pub t_bar: f64,
    /// Fraction of the step at which the boundary is reached. `1` for a
    /// grid-aligned impact, where the last accepted point already lies on the
    /// boundary and the incoming interval is the previous full step.
    pub alpha: f64,
    pub grid_aligned: bool,
    pub h: f64,
    /// Length of the interval `(q_prev, q_in)`.
    pub h_prev: f64,
    /// Length of the interval `(q_in, q_bar)`.
    pub h_in: f64,
    /// Length of the interval `(q_bar, q_post)`.
    pub h_out: f64,
    /// `g(q_bar)`.
    pub gap: f64,
    /// Point before `q_in`; enters the stage-1 momentum balance.
    pub q_prev: Vector,
    /// Last point before the impact point.
    pub q_in: Vector,
    pub q_bar: Vector,
    pub q_post: Vector,
    pub q_resume: Vector,
    pub lambda_stage1: Vector,
    pub lambda_bar: f64,
    pub nu: Vector,
    pub lambda_stage3: Vector,
    pub stage1_residual: f64,
    pub momentum_residual: f64,
    pub discrete_energy_residual: f64,
    pub jump_constraint_residual: f64,
    pub stage3_residual: f64,
    /// Energy of the discrete velocity of the last full interval before the
    /// impact.
    pub physical_energy_before: f64,
    /// Energy of the discrete velocity of the first full interval after it.
    pub physical_energy_after: f64,
    /// The resumed point violated a constraint and was resolved as a further
    /// impact.
    pub chained: bool,
}

impl ImpactRecord {
    /// Incoming discrete velocity `(q_bar - q_in) / h_in`.
    pub fn incoming_velocity(&self) -> Vector {
        (&self.q_bar - &self.q_in) / self.h_in
    }

    /// Outgoing discrete velocity `(q_post - q_bar) / h_out`.
    pub fn outgoing_velocity(&self) -> Vector {
        (&self.q_post - &self.q_bar) / self.h_out
    }

    pub fn energy_change(&self) -> f64 {
        self.physical_energy_after - self.physical_energy_before
    }

    /// Recomputes the stage-2 residuals, the boundary gap and the sign and
    /// range conditions from the stored configurations, returning a
    /// description of the first violated invariant.
    pub fn recheck(&self, model: &Model, cfg: &StepperConfig) -> std::result::Result<(), String> {
        let ic = model
            .boundary(&self.constraint_label)
            .ok_or_else(|| format!("unknown constraint {}", self.constraint_label))?;
        let g = ic.gap(&self.q_bar);
        if !(g.abs() <= cfg.boundary_tolerance) {
            return Err(format!(
                "|g(q_bar)| = {:.3e} exceeds the boundary tolerance",
                g.abs()
            ));
        }
        if !self.grid_aligned
            && !(self.alpha > cfg.alpha_margin && self.alpha < 1.0 - cfg.alpha_margin)
        {
            return Err(format!(
                "alpha = {} outside the open unit interval",
                self.alpha
            ));
        }
        if !(self.lambda_bar >= 0.0) {
            return Err(format!("lambda_bar = {:.3e} is negative", self.lambda_bar));
        }
        let (r_mom, r_energy, r_con) = jump_residual(
            model,
            ic,
            &self.q_in,
            &self.q_bar,
            self.h_in,
            self.h_out,
            &self.q_post,
            self.lambda_bar,
            &self.nu,
        );
        let tol = cfg.newton.residual_tolerance;
        if !(r_mom.amax() <= tol) {
            return Err(format!(
                "momentum residual {:.3e} exceeds {tol:.1e}",
                r_mom.amax()
            ));
        }
        if !(r_energy.abs() <= tol) {
            return Err(format!(
                "D3 equality residual {:.3e} exceeds {tol:.1e}",
                r_energy.abs()
            ));
        }
        if !(max_abs(&r_con) <= tol) {
            return Err(format!(
                "discrete constraint residual {:.3e} exceeds {tol:.1e}",
                max_abs(&r_con)
            ));
        }
        if !self.grid_aligned {
            let r1 = localize_residual(
                model,
                ic,
                &self.q_prev,
                &self.q_in,
                self.h_prev,
                self.h,
                &self.q_bar,
                self.alpha,
                &self.lambda_stage1,
            );
            if !(r1.amax() <= tol) {
                return Err(format!(
                    "stage-1 residual {:.3e} exceeds {tol:.1e}",
                    r1.amax()
                ));
            }
        }
        let mu = model.constraints.one_forms(&self.q_post);
        let (r3, c3) = step_residual(
            model,
            &self.q_bar,
            &self.q_post,
            &self.q_resume,
            self.h_out,
            self.h,
            &mu,
            &self.lambda_stage3,
        );
        let r3 = r3.amax().max(max_abs(&c3));
        if !(r3 <= tol) {
            return Err(format!("stage-3 residual {r3:.3e} exceeds {tol:.1e}"));
        }
        for other in &model.boundaries {
            let g = other.gap(&self.q_post);
            if !(g <= cfg.boundary_tolerance) {
                return Err(format!("g(q_post) = {g:.3e} for {}", other.label()));
            }
        }
        Ok(())
    }
}
