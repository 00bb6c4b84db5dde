use thiserror::Error;

/// Failures reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("outside the admissible domain: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("iteration diverged: {0}")]
    Divergence(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
