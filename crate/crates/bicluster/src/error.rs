use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("sampler failed at iteration {iteration}: {message}")]
    Sampler { iteration: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code contract: 2 for bad inputs, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Sampler { .. } => 3,
            _ => 2,
        }
    }
}
