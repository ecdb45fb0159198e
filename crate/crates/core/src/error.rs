use thiserror::Error;

/// Errors raised by the sensing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter combination (sizes, ratios, window lengths, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Matrix or vector dimensions do not agree.
    #[error("shape error: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },
    /// Recovery found no cycle frequency besides DC.
    #[error("no cycle frequency in recovered support")]
    NoCycleFrequency,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for errors caused by user-supplied parameters rather than runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse(_) | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
