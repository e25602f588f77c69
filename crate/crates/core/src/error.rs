use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid subset {indices:?} for dimension {n}: {reason}")]
    InvalidSubset {
        indices: Vec<usize>,
        n: usize,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric: entry ({i},{j}) differs from ({j},{i}) by {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("block on subset {subset:?} is not positive definite (pivot {pivot:e} at position {position})")]
    Factorization {
        subset: Vec<usize>,
        position: usize,
        pivot: f64,
    },

    #[error("invalid sampling: {0}")]
    InvalidSampling(String),

    #[error("sampling is not proper: coordinate {0} is never selected")]
    ImproperSampling(usize),

    #[error("sampling support has {size} subsets, above the exact-enumeration cap of {cap}; use monte_carlo mode")]
    EnumerationCapacity { size: u128, cap: usize },

    #[error("operation requires a uniform sampling")]
    NonUniformSampling,

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e})")]
    InnerSolver { iterations: usize, residual: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(
        "divergence detected at iteration {iteration}: residual {residual:e} grew from {initial:e}"
    )]
    Divergence {
        iteration: usize,
        residual: f64,
        initial: f64,
    },

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
