use thiserror::Error;

/// Errors raised by the construction and verification pipelines.
#[derive(Debug, Error)]
pub enum SolitonError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate state at t = {t}: {reason}")]
    DegenerateState { t: f64, reason: &'static str },

    #[error("fixed-point iteration did not contract: {0}")]
    NotContracting(String),

    #[error("fixed-point iteration exceeded {0} iterations")]
    MaxIterations(usize),

    #[error("non-finite value at t = {0}")]
    NonFinite(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("accuracy error: {0}")]
    Accuracy(String),

    #[error("comparison error: {0}")]
    Comparison(String),

    #[error("corrupt trajectory: {0}")]
    CorruptTrajectory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SolitonError>;
