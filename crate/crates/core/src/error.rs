use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Volume geometry, mask or replication counts disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{path}: bad container header at byte {offset}: {reason}")]
    Header {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("{path}: truncated payload at byte {offset}: expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        offset: u64,
        expected: u64,
        actual: u64,
    },

    #[error("{path}: trailing data at byte {offset}: {extra} bytes past the declared payload")]
    Trailing { path: PathBuf, offset: u64, extra: u64 },

    /// A computation produced no usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Delimited-text import problems (duplicate rows, missing replications, ...).
    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn shape<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
