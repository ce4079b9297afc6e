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

    #[error("line {line}: field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },

    #[error("duplicate conversation id `{0}`")]
    DuplicateId(String),

    #[error("duplicate speaker profile `{0}`")]
    DuplicateProfile(String),

    #[error("invalid conversation: {0}")]
    InvalidConversation(String),

    #[error("end index {end} out of range for a conversation of {len} turns")]
    WindowOutOfRange { end: usize, len: usize },

    #[error("window length k must be positive")]
    ZeroWindow,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("text has no tokens")]
    EmptyText,

    #[error("topic model is not fitted")]
    NotFitted,

    #[error("remote provider: {0}")]
    Remote(String),

    #[error("embedding cache: {0}")]
    Cache(String),

    #[error("unknown agenda item `{0}`")]
    UnknownItem(String),

    #[error("speaker `{0}` has no turns")]
    SpeakerAbsent(String),

    #[error("speaker `{0}` owns every turn")]
    SpeakerOwnsAll(String),

    #[error("speaker `{0}` has neither turns nor background text")]
    NoSpeakerEvidence(String),

    #[error("unstable centroid for speaker `{0}`: mean embedding has near-zero norm")]
    UnstableCentroid(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("artifact extraction failed: {0}")]
    ArtifactExtraction(String),

    #[error("invalid predicate: {0}")]
    Predicate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("report fingerprint {found} does not match configuration fingerprint {expected}")]
    FingerprintMismatch { expected: String, found: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of a semantic backend (remote transport, cache).
    pub fn is_provider_error(&self) -> bool {
        matches!(self, Error::Remote(_) | Error::Cache(_))
    }
}
