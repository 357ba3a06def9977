use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed BST1 / label / mask payload. `offset` is the byte offset
    /// where decoding failed.
    #[error("format error in {path} at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate vector: {0}")]
    DegenerateVector(&'static str),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty point set")]
    EmptyPointSet,

    #[error("no training pixels for class '{0}'")]
    MissingClass(String),

    #[error("required band '{0}' not present")]
    MissingBand(String),

    #[error("latent-space model requires a latent feature field")]
    MissingLatent,

    #[error("model has no prototypes")]
    EmptyModel,

    #[error("tiling error: {0}")]
    Tiling(String),

    #[error("unsupported model format_version {found} (expected {expected})")]
    Version { found: i64, expected: u32 },

    #[error("model schema violation: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            message: message.into(),
        }
    }
}
