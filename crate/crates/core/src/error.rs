use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("eigen-decomposition residual {residual:e} exceeds tolerance {tolerance:e}")]
    Convergence { residual: f64, tolerance: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("fit error: {0}")]
    Fit(String),
}
