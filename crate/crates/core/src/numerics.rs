//! Damped Newton iteration and central finite differences.
//!
//! Every implicit system in the integrator (interior steps, the three impact
//! stages, the continuous jump) is square and small, so the solver works on
//! dense matrices and factorizes the full Jacobian at every iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, NewtonFailure, Result};
use crate::{Matrix, Vector};

/// Armijo constant for the sufficient-decrease test on `|r|^2`.
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    /// Convergence threshold on the max-norm of the residual.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    /// Backtracking factor applied to the step length on a failed Armijo test.
    pub damping: f64,
    /// Smallest step length tried before giving up.
    pub min_step: f64,
    /// Jacobians whose condition estimate exceeds this are treated as singular.
    pub singular_condition: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            residual_tolerance: 1e-10,
            max_iterations: 50,
            damping: 0.5,
            min_step: 1e-8,
            singular_condition: 1e12,
        }
    }
}

impl NewtonConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        NewtonConfig {
            residual_tolerance: tol,
            ..NewtonConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidParameter {
                name: name.to_string(),
                reason: reason.to_string(),
            })
        };
        if !(self.residual_tolerance > 0.0 && self.residual_tolerance.is_finite()) {
            return bad("residual_tolerance", "must be positive and finite");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("damping", "must lie in (0, 1)");
        }
        if !(self.min_step > 0.0 && self.min_step < 1.0) {
            return bad("min_step", "must lie in (0, 1)");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations", "must be at least 1");
        }
        if !(self.singular_condition > 1.0) {
            return bad("singular_condition", "must exceed 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vector,
    pub final_residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the residual at the initial guess and after every
    /// accepted iteration.
    pub residual_history: Vec<f64>,
}

/// Solves `residual(x) = 0` by Newton's method with Armijo backtracking on
/// `|residual|^2`.
///
/// Returns an error unless the max-norm of the residual falls to
/// `cfg.residual_tolerance`. The iteration is deterministic: identical inputs
/// produce bit-identical iterates.
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    x0: &Vector,
    cfg: &NewtonConfig,
) -> Result<SolveReport>
where
    R: FnMut(&Vector) -> Vector,
    J: FnMut(&Vector) -> Matrix,
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0.clone();
    let mut r = residual(&x);
    if r.len() != n {
        return Err(Error::DimensionMismatch {
            what: "Newton residual",
            expected: n,
            found: r.len(),
        });
    }

    let mut history = Vec::with_capacity(cfg.max_iterations + 1);
    let fail = |failure, iterations, history: &Vec<f64>| Error::Newton {
        failure,
        iterations,
        residual_history: history.clone(),
    };

    if !all_finite(&r) {
        return Err(fail(NewtonFailure::NonFiniteResidual, 0, &history));
    }
    let mut norm = r.amax();
    history.push(norm);

    for iteration in 0..cfg.max_iterations {
        if norm <= cfg.residual_tolerance {
            return Ok(SolveReport {
                solution: x,
                final_residual_norm: norm,
                iterations: iteration,
                converged: true,
                residual_history: history,
            });
        }

        let jac = jacobian(&x);
        if jac.nrows() != n || jac.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "Newton Jacobian",
                expected: n,
                found: if jac.nrows() != n {
                    jac.nrows()
                } else {
                    jac.ncols()
                },
            });
        }
        if !jac.iter().all(|v| v.is_finite()) {
            return Err(fail(NewtonFailure::NonFiniteResidual, iteration, &history));
        }
        let condition = condition_estimate(&jac);
        if !(condition <= cfg.singular_condition) {
            return Err(fail(
                NewtonFailure::SingularJacobian { condition },
                iteration,
                &history,
            ));
        }
        let dx = match jac.lu().solve(&(-&r)) {
            Some(dx) => dx,
            None => {
                return Err(fail(
                    NewtonFailure::SingularJacobian {
                        condition: f64::INFINITY,
                    },
                    iteration,
                    &history,
                ))
            }
        };

        let merit = r.norm_squared();
        let mut step = 1.0;
        loop {
            let trial = &x + step * &dx;
            let r_trial = residual(&trial);
            if all_finite(&r_trial) && r_trial.norm_squared() <= (1.0 - 2.0 * ARMIJO * step) * merit
            {
                x = trial;
                r = r_trial;
                break;
            }
            step *= cfg.damping;
            if step < cfg.min_step {
                return Err(fail(NewtonFailure::LineSearch, iteration + 1, &history));
            }
        }
        norm = r.amax();
        history.push(norm);
    }

    if norm <= cfg.residual_tolerance {
        return Ok(SolveReport {
            solution: x,
            final_residual_norm: norm,
            iterations: cfg.max_iterations,
            converged: true,
            residual_history: history,
        });
    }
    Err(fail(
        NewtonFailure::MaxIterations,
        cfg.max_iterations,
        &history,
    ))
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_estimate(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

pub(crate) fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Central-difference Jacobian of `f` at `x`, with step
/// `eps^(1/3) * max(1, |x_j|)` in coordinate `j`.
pub fn fd_jacobian<F>(mut f: F, x: &Vector) -> Result<Matrix>
where
    F: FnMut(&Vector) -> Vector,
{
    let n = x.len();
    let mut jac: Option<Matrix> = None;
    let mut probe = x.clone();
    for j in 0..n {
        let h = fd_step(x[j]);
        probe[j] = x[j] + h;
        let plus = f(&probe);
        probe[j] = x[j] - h;
        let minus = f(&probe);
        probe[j] = x[j];
        if !all_finite(&plus) || !all_finite(&minus) {
            return Err(Error::NonFinite {
                what: "finite-difference evaluation",
            });
        }
        let jac = jac.get_or_insert_with(|| Matrix::zeros(plus.len(), n));
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    match jac {
        Some(jac) => Ok(jac),
        None => Ok(Matrix::zeros(f(x).len(), 0)),
    }
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F>(mut f: F, x: &Vector) -> Result<Vector>
where
    F: FnMut(&Vector) -> f64,
{
    let jac = fd_jacobian(|y| Vector::from_element(1, f(y)), x)?;
    Ok(jac.row(0).transpose())
}

/// Central-difference derivative of a vector-valued function of one scalar.
pub fn fd_derivative<F>(mut f: F, s: f64) -> Result<Vector>
where
    F: FnMut(f64) -> Vector,
{
    let jac = fd_jacobian(|y| f(y[0]), &Vector::from_element(1, s))?;
    Ok(jac.column(0).into_owned())
}

/// Central-difference directional derivative `d/de f(x + e*dir)` at `e = 0`
/// of a matrix-valued function.
pub fn fd_directional<F>(mut f: F, x: &Vector, dir: &Vector) -> Result<Matrix>
where
    F: FnMut(&Vector) -> Matrix,
{
    let scale = dir.amax();
    let base = f(x);
    if scale == 0.0 {
        return Ok(Matrix::zeros(base.nrows(), base.ncols()));
    }
    let h = fd_step(x.amax()) / scale;
    let plus = f(&(x + h * dir));
    let minus = f(&(x - h * dir));
    let d = (plus - minus) / (2.0 * h);
    if !d.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            what: "finite-difference evaluation",
        });
    }
    Ok(d)
}
