//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration cannot produce a well-formed artifact (e.g. a layer
    /// chain that underflows the signal length).
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An operation was called in a state it cannot run from.
    #[error("state error: {0}")]
    StateError(String),

    /// A numeric routine failed to converge or produced a non-finite value.
    #[error("numeric error: {0}")]
    NumericError(String),

    /// Training produced a non-finite loss.
    #[error("numeric divergence: non-finite loss at epoch {epoch}")]
    NumericDivergence { epoch: usize },

    /// Integrating a new class needs more samples than were supplied.
    #[error("needs more data: {shortfall} more samples required ({available} of {required})")]
    NeedsMoreData {
        required: usize,
        available: usize,
        shortfall: usize,
    },

    /// A data file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Filesystem failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
