use thiserror::Error;

/// Crate-wide error type.
///
/// `InvariantViolated` is reserved for conditions that can only happen through
/// a bug or a broken physical assumption (e.g. a Bell value below the quantum
/// bound); the CLI maps it to a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("total dimension {got} exceeds cap {cap}")]
    CapExceeded { got: u128, cap: usize },

    #[error("numerical invariant violated: {0}")]
    InvariantViolated(String),

    #[error("line {line}: {msg}")]
    ParseLine { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::InvariantViolated(msg.into())
    }
}
