//! Error type shared across the crate.

use std::path::PathBuf;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All the ways the pipeline can fail.
///
/// The variants are grouped by who is at fault: [`Error::Config`] means the
/// caller supplied bad settings, [`Error::Io`]/[`Error::Malformed`]/
/// [`Error::Invalid`] mean the input data is unusable, and
/// [`Error::Internal`] means an invariant of this crate was violated.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Filesystem problem (missing file, permission, short read).
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record in an input file could not be parsed.
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    /// Input parsed but violates a semantic requirement.
    #[error("{0}")]
    Invalid(String),

    /// Bad configuration value or unknown configuration key.
    #[error("config: {0}")]
    Config(String),

    /// An internal invariant did not hold; this is a bug, not a data error.
    #[error("internal: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(
        path: impl Into<PathBuf>,
        line: usize,
        reason: impl Into<String>,
    ) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
