use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid source/detector layout: {0}")]
    InvalidLayout(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("singular matrix")]
    Singular,

    #[error("breakdown in {0}: non-finite value")]
    Breakdown(&'static str),

    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("system {system}, right-hand side {rhs}: inner solve failed after {iterations} iterations (relative residual {residual:e})")]
    InnerSolveFailed {
        system: usize,
        rhs: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("reduced operator is not positive definite; the basis is corrupted")]
    IndefiniteReducedOperator,

    #[error("optimization diverged: residual {residual:e} exceeds {limit:e}")]
    Diverged { residual: f64, limit: f64 },

    #[error("oracle size guard: {size} unknowns exceeds {limit}")]
    TooLarge { size: usize, limit: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
