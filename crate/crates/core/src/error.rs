//! Shared error type for the library.

/// Errors produced by model evaluation, data handling, and estimation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation
    /// (nonpositive input to a log, sigma out of range, and so on).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates a declared invariant (duplicate keys, nonpositive
    /// quantities, missing columns). Messages name the offending (firm, year)
    /// or row where one exists.
    #[error("validation error: {0}")]
    Validation(String),

    /// A delimited-text input could not be parsed.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// A numerical routine failed (rank deficiency, singular matrix,
    /// non-finite intermediate).
    #[error("numerical failure: {0}")]
    Computation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn computation(msg: impl Into<String>) -> Self {
        Error::Computation(msg.into())
    }
}
