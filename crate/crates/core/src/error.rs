use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Why a Newton solve stopped without meeting its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub enum NewtonFailure {
    MaxIterations,
    /// Backtracking shrank the step below `min_step` without decreasing the
    /// residual.
    LineSearch,
    /// Jacobian factorization failed or its condition estimate exceeded the
    /// singularity threshold.
    SingularJacobian {
        condition: f64,
    },
    NonFiniteResidual,
}

impl fmt::Display for NewtonFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NewtonFailure::MaxIterations => write!(f, "iteration limit reached"),
            NewtonFailure::LineSearch => write!(f, "line search stalled"),
            NewtonFailure::SingularJacobian { condition } => {
                write!(f, "singular Jacobian (condition estimate {condition:.3e})")
            }
            NewtonFailure::NonFiniteResidual => write!(f, "non-finite residual"),
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("mass matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("constraint one-forms are rank deficient: rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("gap gradient of {label} vanishes on the boundary")]
    ZeroBoundaryGradient { label: String },

    #[error("Newton solve failed after {iterations} iterations: {failure} (residual history {residual_history:?})")]
    Newton {
        failure: NewtonFailure,
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("grazing contact with {label}: normal velocity {normal_velocity:.3e}")]
    Grazing { label: String, normal_velocity: f64 },

    #[error("impact against {label} is inadmissible: normal multiplier {lambda_bar:.6e} < 0")]
    InadmissibleImpact { label: String, lambda_bar: f64 },

    #[error("impact fraction alpha = {alpha:.6e} outside the open unit interval")]
    DegenerateAlpha { alpha: f64 },

    #[error("point after impact violates {label}: g = {gap:.6e}")]
    PostImpactViolation { label: String, gap: f64 },

    #[error("more than {limit} chained impacts within one step")]
    ChainedImpacts { limit: usize },

    #[error("inequality constraints {labels:?} violated in the same step")]
    SimultaneousViolation { labels: Vec<String> },

    #[error("invalid bracket: g(t_lo) = {g_lo:.6e}, g(t_hi) = {g_hi:.6e}")]
    InvalidBracket { g_lo: f64, g_hi: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("step {step} at t = {time}: {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize, time: f64) -> Error {
        match self {
            e @ Error::Step { .. } => e,
            e => Error::Step {
                step,
                time,
                source: Box::new(e),
            },
        }
    }

    /// Innermost error, with any step context removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            e => e,
        }
    }
}
