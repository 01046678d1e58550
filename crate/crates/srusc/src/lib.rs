//! File formats, reports, benchmarks and the command-line interface around
//! [`srusc_core`].

use std::path::Path;

pub mod bench;
pub mod cli;
pub mod formats;
pub mod report;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Core(#[from] srusc_core::Error),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Whether the failure stems from bad user input rather than the run
    /// itself.
    pub fn is_argument_error(&self) -> bool {
        matches!(
            self,
            Error::Argument(_) | Error::Core(srusc_core::Error::InvalidArgument(_))
        )
    }
}
