//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration: mismatched dimensions, bad field values,
    /// malformed config files.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an operation precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The operation is not defined for this objective family.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A non-finite value appeared where the numerics require finiteness.
    #[error("numerical overflow: {0}")]
    Numerical(String),

    /// An iterate escaped the working ball on which the assumption
    /// constants were derived; theory checks are meaningless past this.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// Malformed input data (bad magic bytes, ragged CSV rows, ...).
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the CLI: 1 config, 2 numerical, 3 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::Unsupported(_)
            | Error::Format { .. } => 1,
            Error::Numerical(_) | Error::DomainViolation(_) => 2,
            Error::Io { .. } => 3,
        }
    }
}
