//! Mechanical model: Lagrangian data, linear velocity constraints and
//! inequality constraints, plus the checked elementary maps every other
//! module is built on.
//!
//! Systems are described by three traits. Derivatives have finite-difference
//! defaults so a new system only needs its values; the catalog systems
//! override all of them with analytic expressions.

use crate::error::{Error, Result};
use crate::numerics::{self, fd_directional, fd_gradient, fd_jacobian};
use crate::{Matrix, Vector};

/// A mechanical Lagrangian `L(q, v) = 1/2 v^T M(q) v - V(q)` on an
/// `n`-dimensional configuration space.
pub trait MechanicalSystem: Send + Sync {
    fn dim(&self) -> usize;

    fn mass_matrix(&self, q: &Vector) -> Matrix;

    fn potential(&self, q: &Vector) -> f64;

    fn potential_gradient(&self, q: &Vector) -> Vector {
        fd_gradient(|y| self.potential(y), q).unwrap_or_else(|_| nan_vector(q.len()))
    }

    /// `sum_k dM/dq_k v_k`, the time derivative of `M(q(t))` along `v`.
    fn mass_matrix_rate(&self, q: &Vector, v: &Vector) -> Matrix {
        fd_directional(|y| self.mass_matrix(y), q, v)
            .unwrap_or_else(|_| Matrix::from_element(q.len(), q.len(), f64::NAN))
    }

    /// Gradient in `q` of the kinetic energy `1/2 v^T M(q) v` at fixed `v`.
    fn kinetic_gradient(&self, q: &Vector, v: &Vector) -> Vector {
        fd_gradient(|y| 0.5 * v.dot(&(self.mass_matrix(y) * v)), q)
            .unwrap_or_else(|_| nan_vector(q.len()))
    }
}

/// The distribution `D = { v : mu(q) v = 0 }` given by `m` one-forms, and a
/// discrete constraint space `D_d = { (q0, q1) : mu_d(q0, q1) = 0 }` that
/// contains the diagonal.
pub trait ConstraintSet: Send + Sync {
    /// Number of constraints `m`.
    fn count(&self) -> usize;

    /// The `m x n` matrix whose row `a` is the one-form `mu^a(q)`.
    fn one_forms(&self, q: &Vector) -> Matrix;

    /// `sum_k d(mu)/dq_k v_k`, the time derivative of `mu(q(t))` along `v`.
    fn one_forms_rate(&self, q: &Vector, v: &Vector) -> Matrix {
        fd_directional(|y| self.one_forms(y), q, v)
            .unwrap_or_else(|_| Matrix::from_element(self.count(), q.len(), f64::NAN))
    }

    fn discrete(&self, q0: &Vector, q1: &Vector) -> Vector;

    fn discrete_jacobian_q0(&self, q0: &Vector, q1: &Vector) -> Matrix {
        fd_jacobian(|y| self.discrete(y, q1), q0)
            .unwrap_or_else(|_| Matrix::from_element(self.count(), q0.len(), f64::NAN))
    }

    fn discrete_jacobian_q1(&self, q0: &Vector, q1: &Vector) -> Matrix {
        fd_jacobian(|y| self.discrete(q0, y), q1)
            .unwrap_or_else(|_| Matrix::from_element(self.count(), q1.len(), f64::NAN))
    }
}

/// A scalar gap function: the admissible set is `g(q) <= 0` and the boundary
/// is `g(q) = 0`.
pub trait InequalityConstraint: Send + Sync {
    fn label(&self) -> &str;

    fn gap(&self, q: &Vector) -> f64;

    fn gap_gradient(&self, q: &Vector) -> Vector {
        fd_gradient(|y| self.gap(y), q).unwrap_or_else(|_| nan_vector(q.len()))
    }
}

/// No velocity constraints (`D = TQ`, `D_d = Q x Q`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unconstrained {
    pub dim: usize,
}

impl ConstraintSet for Unconstrained {
    fn count(&self) -> usize {
        0
    }

    fn one_forms(&self, _q: &Vector) -> Matrix {
        Matrix::zeros(0, self.dim)
    }

    fn one_forms_rate(&self, _q: &Vector, _v: &Vector) -> Matrix {
        Matrix::zeros(0, self.dim)
    }

    fn discrete(&self, _q0: &Vector, _q1: &Vector) -> Vector {
        Vector::zeros(0)
    }

    fn discrete_jacobian_q0(&self, _q0: &Vector, _q1: &Vector) -> Matrix {
        Matrix::zeros(0, self.dim)
    }

    fn discrete_jacobian_q1(&self, _q0: &Vector, _q1: &Vector) -> Matrix {
        Matrix::zeros(0, self.dim)
    }
}

/// Position of a configuration relative to an inequality constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Interior,
    Boundary,
    Exterior,
}

fn nan_vector(n: usize) -> Vector {
    Vector::from_element(n, f64::NAN)
}

/// Checks length and finiteness of a configuration-sized vector.
pub fn check_vector(what: &'static str, v: &Vector, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            what,
            expected: n,
            found: v.len(),
        });
    }
    if !numerics::all_finite(v) {
        return Err(Error::NonFinite { what });
    }
    Ok(())
}

/// `M(q)`, verified symmetric and positive definite.
pub fn mass_matrix(sys: &dyn MechanicalSystem, q: &Vector) -> Result<Matrix> {
    check_vector("configuration", q, sys.dim())?;
    let m = sys.mass_matrix(q);
    let n = sys.dim();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "mass matrix",
            expected: n,
            found: m.nrows().max(m.ncols()),
        });
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            what: "mass matrix",
        });
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (&m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite);
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(m)
}

/// `p = dL/dv = M(q) v`.
pub fn legendre_transform(sys: &dyn MechanicalSystem, q: &Vector, v: &Vector) -> Result<Vector> {
    check_vector("velocity", v, sys.dim())?;
    Ok(mass_matrix(sys, q)? * v)
}

/// Inverse of [`legendre_transform`]: the velocity with momentum `p`.
pub fn inverse_legendre_transform(
    sys: &dyn MechanicalSystem,
    q: &Vector,
    p: &Vector,
) -> Result<Vector> {
    check_vector("momentum", p, sys.dim())?;
    let chol = mass_matrix(sys, q)?
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(p))
}

/// `E_L = 1/2 v^T M(q) v + V(q)`.
pub fn energy(sys: &dyn MechanicalSystem, q: &Vector, v: &Vector) -> Result<f64> {
    check_vector("velocity", v, sys.dim())?;
    let m = mass_matrix(sys, q)?;
    let e = 0.5 * v.dot(&(m * v)) + sys.potential(q);
    if !e.is_finite() {
        return Err(Error::NonFinite { what: "energy" });
    }
    Ok(e)
}

/// `mu(q)`, verified to have full row rank.
pub fn constraint_matrix(cs: &dyn ConstraintSet, q: &Vector) -> Result<Matrix> {
    if !numerics::all_finite(q) {
        return Err(Error::NonFinite {
            what: "configuration",
        });
    }
    let mu = cs.one_forms(q);
    let m = cs.count();
    if mu.nrows() != m || mu.ncols() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "constraint one-forms",
            expected: m,
            found: mu.nrows(),
        });
    }
    if !mu.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            what: "constraint one-forms",
        });
    }
    if m > 0 {
        let rank = numerics::numerical_rank(&mu, 1e-10);
        if rank < m {
            return Err(Error::RankDeficient { rank, expected: m });
        }
    }
    Ok(mu)
}

/// `(g(q), dg(q))`.
pub fn gap_and_gradient(ic: &dyn InequalityConstraint, q: &Vector) -> Result<(f64, Vector)> {
    if !numerics::all_finite(q) {
        return Err(Error::NonFinite {
            what: "configuration",
        });
    }
    let g = ic.gap(q);
    let dg = ic.gap_gradient(q);
    if !g.is_finite() || !numerics::all_finite(&dg) {
        return Err(Error::NonFinite { what: "gap" });
    }
    Ok((g, dg))
}

/// `dg(q)` at a boundary point, rejecting a vanishing gradient.
pub fn boundary_gradient(ic: &dyn InequalityConstraint, q: &Vector) -> Result<Vector> {
    let (_, dg) = gap_and_gradient(ic, q)?;
    if dg.amax() <= f64::EPSILON {
        return Err(Error::ZeroBoundaryGradient {
            label: ic.label().to_string(),
        });
    }
    Ok(dg)
}

pub fn classify(ic: &dyn InequalityConstraint, q: &Vector, tolerance: f64) -> Region {
    let g = ic.gap(q);
    if g.abs() <= tolerance {
        Region::Boundary
    } else if g < 0.0 {
        Region::Interior
    } else {
        Region::Exterior
    }
}

/// Pieces of the saddle-point geometry at `q`: `M^-1`, `mu`, and the
/// factorized Schur complement `mu M^-1 mu^T`.
pub(crate) struct ConstraintGeometry {
    pub mass: Matrix,
    pub mass_inv: Matrix,
    pub mu: Matrix,
    schur: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl ConstraintGeometry {
    pub fn new(sys: &dyn MechanicalSystem, cs: &dyn ConstraintSet, q: &Vector) -> Result<Self> {
        let mass = mass_matrix(sys, q)?;
        let mass_inv = mass
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .inverse();
        let mu = constraint_matrix(cs, q)?;
        let schur = if mu.nrows() > 0 {
            let s = &mu * &mass_inv * mu.transpose();
            let rank = mu.nrows();
            Some(s.cholesky().ok_or(Error::RankDeficient {
                rank: rank.saturating_sub(1),
                expected: rank,
            })?)
        } else {
            None
        };
        Ok(ConstraintGeometry {
            mass,
            mass_inv,
            mu,
            schur,
        })
    }

    /// Multipliers `nu` with `M^-1 mu^T nu` the M-orthogonal component of
    /// `M^-1 f` normal to `D`: `nu = (mu M^-1 mu^T)^-1 mu M^-1 f`.
    pub fn reaction_multipliers(&self, f: &Vector) -> Vector {
        match &self.schur {
            Some(chol) => chol.solve(&(&self.mu * &self.mass_inv * f)),
            None => Vector::zeros(0),
        }
    }

    /// The M-orthogonal projection of `v` onto `D_q`.
    pub fn project(&self, v: &Vector) -> Vector {
        match &self.schur {
            Some(chol) => {
                let nu = chol.solve(&(&self.mu * v));
                v - &self.mass_inv * self.mu.transpose() * nu
            }
            None => v.clone(),
        }
    }
}

/// The M-orthogonal projection of `v` onto `D_q`.
pub fn project_to_distribution(
    sys: &dyn MechanicalSystem,
    cs: &dyn ConstraintSet,
    q: &Vector,
    v: &Vector,
) -> Result<Vector> {
    check_vector("velocity", v, sys.dim())?;
    Ok(ConstraintGeometry::new(sys, cs, q)?.project(v))
}
