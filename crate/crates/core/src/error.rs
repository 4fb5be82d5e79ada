use thiserror::Error;

/// Errors raised by operator construction, state predicates and the analyses built on them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("dimension {got} is below the minimum of {min}")]
    DimensionTooSmall { got: usize, min: usize },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator is not positive (minimum eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("trace {0} is not 1")]
    TraceNotUnit(f64),

    #[error("perturbation is not traceless (trace {0:e})")]
    NotTraceless(f64),

    #[error("perturbation operator is zero")]
    ZeroPerturbation,

    #[error("eigensolver did not converge")]
    EigenFailure,

    #[error("state is not full rank (rank {rank}, dimension {dim})")]
    NotFullRank { rank: usize, dim: usize },

    #[error("rank {rank} is out of range for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level-set bisection failed: {0}")]
    Bisection(String),

    #[error("strict convexity violation: f = {center} at the level state, f = {plus} and {minus} at the perturbed states, level {level}")]
    StrictConvexityViolation {
        level: f64,
        center: f64,
        plus: f64,
        minus: f64,
    },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that indicate broken internal invariants rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::EigenFailure | Error::Verification(_) | Error::StrictConvexityViolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
