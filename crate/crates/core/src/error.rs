use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context} at line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),

    #[error("unknown emotion '{0}'")]
    UnknownEmotion(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient temporal span: {0} month(s) of data, need at least 2")]
    InsufficientTemporalSpan(usize),

    #[error("example '{0}' has no timestamp")]
    MissingTimestamp(String),

    #[error("not enough eligible examples for emotions: {}", .0.join(", "))]
    InsufficientExamples(Vec<String>),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("model has not been fitted")]
    NotFitted,

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("example ids missing from one of the sources: {}", .0.join(", "))]
    IdMismatch(Vec<String>),

    #[error("artifact version mismatch: file has version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("artifact is truncated: {0}")]
    Truncated(String),

    #[error("artifact checksum mismatch")]
    Checksum,

    #[error("artifact is malformed: {0}")]
    Malformed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.into(),
        }
    }
}
