use thiserror::Error;

/// Errors produced by the library. Every variant is an input or
/// precondition problem; "no" answers and "unknown" answers are ordinary
/// return values, never errors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("need a longer prefix: entry {index} is not available")]
    NeedPrefix { index: usize },

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
