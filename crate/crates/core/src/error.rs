//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library. Variants are grouped so that the CLI can
/// map them onto stable exit codes (parse/io, dimension/consistency, numeric).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("inconsistent input: {0}")]
    Consistency(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn dimension(message: impl Into<String>) -> Self {
        Error::Dimension(message.into())
    }

    pub fn consistency(message: impl Into<String>) -> Self {
        Error::Consistency(message.into())
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Error::Numeric(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
