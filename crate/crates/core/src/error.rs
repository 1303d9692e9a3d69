use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    CorpusFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path} (byte offset {offset}): {message}")]
    EmbeddingFormat {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("embedding channel {channel} has {rows} rows but the corpus needs {expected}")]
    LengthMismatch {
        channel: &'static str,
        rows: usize,
        expected: usize,
    },

    #[error("invalid label set: {0}")]
    LabelSet(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("unknown document {0:?}")]
    UnknownDocument(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("invalid span [{start}, {end}) on a document of {len} tokens")]
    InvalidSpan { start: usize, end: usize, len: usize },

    #[error("span of {len} tokens exceeds the maximum of {max}; annotate a shorter span")]
    SpanTooLong { len: usize, max: usize },

    #[error("unknown labeling function {0:?}")]
    UnknownFunction(String),

    #[error("no labeling functions are selected")]
    EmptySelection,

    #[error("no model has been fitted yet")]
    NoSnapshot,

    #[error("the model snapshot is stale; retrain or force")]
    StaleSnapshot,

    #[error("all train documents have been served")]
    Exhausted,

    #[error("split {0} has no gold labels")]
    MissingGold(String),

    #[error("model fit failed: {0}")]
    FitFailed(String),

    #[error("project file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },

    #[error("corrupt project file: {0}")]
    CorruptProject(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
