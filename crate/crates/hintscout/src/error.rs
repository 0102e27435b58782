use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    /// The dump or manifest is malformed.
    #[error("manifest: {0}")]
    Manifest(String),
    /// A self-test check failed; carries the check name.
    #[error("check failed: {0}")]
    Check(String),
    #[error("invalid configuration: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hintscout_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        use hintscout_core::Error as C;
        match self {
            Error::Check(_) => 1,
            Error::Io { .. } | Error::Json { .. } | Error::Manifest(_) => 2,
            Error::Usage(_) => 64,
            Error::Core(e) => match e {
                C::Format(_) | C::Length { .. } | C::NonFinite { .. } | C::Shape(_) => 2,
                C::Degenerate(_) => 3,
                C::InvalidArgument(_) => 64,
                C::Invariant(_) => 1,
            },
        }
    }
}
