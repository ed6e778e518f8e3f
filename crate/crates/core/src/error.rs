use std::path::PathBuf;

/// Errors produced by the toolkit.
///
/// The variants follow the failure classes the experiment runner cares about:
/// usage errors are caller mistakes, capability and resource errors mean the
/// request is well formed but too large for the exact machinery.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(
        "element {element} lies outside the distance table of radius {available}; \
         a table of radius at least {required} is required"
    )]
    OutOfRange {
        element: String,
        available: u32,
        required: u32,
    },

    #[error("resource limit: predicted {predicted} elements exceeds the cap of {cap}")]
    Resource { predicted: u64, cap: u64 },

    #[error("capability error: {0}")]
    Capability(String),

    #[error("construction failed at n = {n}: {reason}")]
    Construction { n: u32, reason: String },

    #[error("validation error at `{path}`: {reason}")]
    Validation { path: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Capability and resource errors are recorded per analysis; the rest abort a run.
    pub fn is_capability(&self) -> bool {
        matches!(
            self,
            Error::Capability(_) | Error::Resource { .. } | Error::OutOfRange { .. } | Error::Construction { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
