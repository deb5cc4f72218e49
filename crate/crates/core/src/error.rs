use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("support condition violated: {0}")]
    SupportError(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("recursion depth {depth} exceeds limit {limit}")]
    RecursionDepthExceeded { depth: usize, limit: usize },

    #[error("channel '{0}' has zero relative entropy to s0; authentication is impossible")]
    DegenerateChannel(String),

    #[error("numerical underflow: {0}")]
    NumericalUnderflow(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}
