use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum CastError {
    /// A configuration value is out of range or inconsistent with the rest.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation was handed arguments that violate its contract
    /// (empty candidate set, mismatched dimensions, and the like).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Linear algebra failed: a matrix that must be positive definite was not,
    /// or a solve produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The planner could not produce an action.
    #[error("planning failed: {0}")]
    Planning(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CastError>;
