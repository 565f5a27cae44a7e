use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine.
///
/// Variants are grouped so that a command-line driver can map them onto
/// stable exit codes: argument problems, file/format problems, alignment or
/// validation problems, and numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("corrupt file {}: {msg}", path.display())]
    Corrupt { path: PathBuf, msg: String },

    #[error("dimension mismatch ({context}): expected {expected}, got {got}")]
    DimMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    /// Data violates an invariant or two inputs are not aligned.
    #[error("validation error: {0}")]
    Validation(String),

    /// A caller-supplied parameter is out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn dim(expected: usize, got: usize, context: impl Into<String>) -> Self {
        Error::DimMismatch {
            expected,
            got,
            context: context.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
