use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite input")]
    NonFinite,
    #[error("zero vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("token not in SID: {0}")]
    TokenNotInSid(String),
    #[error("token not in embeddings: {0}")]
    TokenNotInEmbeddings(String),
    #[error("occurrence not found: token {token:?} is absent from sentence {sentence}")]
    OccurrenceNotFound { token: String, sentence: u32 },
    #[error("sentence {0} not in sentence store")]
    SentenceNotFound(u32),
    #[error("degenerate dictionary: {0}")]
    DegenerateDictionary(String),
    #[error("target space not aligned")]
    NotAligned,
    #[error("need at least {needed} points for {clusters} clusters, got {available}")]
    TooFewPoints { needed: usize, clusters: usize, available: usize },
    #[error("empty stream: {0}")]
    EmptyStream(String),
    #[error("missing {}; run `{step}` first", path.display())]
    MissingArtifact { path: PathBuf, step: &'static str },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }
}
