use thiserror::Error;

/// Errors raised by the numerical layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,

    #[error("derivative order {order} exceeds the cap {cap}")]
    DerivativeOrder { order: u32, cap: u32 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("seam violation: {0}")]
    Seam(String),

    #[error("non-finite state after t = {t}")]
    NonFinite { t: f64 },

    #[error("iteration did not converge after {iterations} steps (last residual {last_residual:e})")]
    NotConverged {
        iterations: usize,
        last_residual: f64,
        residuals: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
