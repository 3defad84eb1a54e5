use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    /// Two routes that the theory asserts are equivalent disagreed.
    /// This is a test-failure signal, not a recoverable condition.
    #[error("internal contradiction: {0}")]
    Contradiction(String),

    /// A precondition (regime, exponent window, reverse doubling) failed,
    /// so the requested check does not apply.
    #[error("refused: {0}")]
    Refusal(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
