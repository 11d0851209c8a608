//! Simulation of nonholonomic mechanical systems confined to a region with
//! boundary.
//!
//! The crate provides
//!
//! - [`mechanics`]: the mechanical model (mass matrix, potential, velocity
//!   constraints, inequality constraints) and the elementary maps built on it,
//! - [`numerics`]: a damped Newton solver and finite-difference Jacobians,
//! - [`stepper`]: the discrete Lagrange-d'Alembert integrator, which hands
//!   boundary crossings to
//! - [`impact`]: the continuous jump conditions and the three-stage discrete
//!   impact system,
//! - [`oracle`]: a fine-step Runge-Kutta reference integrator for the
//!   continuous dynamics with impacts,
//! - [`catalog`]: the rolling disk on a circular table and the particle in a
//!   disk, with analytic derivatives.
//!
//! Vectors and matrices are dense `nalgebra` types; every system handled here
//! has at most a handful of coordinates.

// Tolerance checks are written as `!(x <= tol)` on purpose so that NaN fails
// them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
pub mod impact;
pub mod mechanics;
pub mod numerics;
pub mod oracle;
pub mod stepper;

pub use catalog::Model;
pub use error::{Error, NewtonFailure, Result};
pub use impact::{ImpactRecord, JumpSolution};
pub use mechanics::{ConstraintSet, InequalityConstraint, MechanicalSystem};
pub use numerics::{NewtonConfig, SolveReport};
pub use oracle::{ContinuousState, ContinuousTrajectory, JumpEvent, OracleConfig};
pub use stepper::{DiscreteLagrangian, DiscreteTrajectory, PointKind, StepperConfig};

/// Dense column vector used for configurations, velocities, momenta and
/// multipliers.
pub type Vector = nalgebra::DVector<f64>;

/// Dense matrix.
pub type Matrix = nalgebra::DMatrix<f64>;
