//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the learning core, environments, and harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value was structurally invalid: wrong dimension,
    /// out-of-range action index, non-positive scale, and similar.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A numerical guarantee failed at run time, e.g. a non-positive
    /// innovation variance or a covariance that lost positive definiteness.
    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),
    /// A config, snapshot, or grid document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::NumericDegeneracy(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
