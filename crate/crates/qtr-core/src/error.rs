use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: left {lhs:?}, right {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: [usize; 2],
        rhs: [usize; 2],
    },
    #[error("{op}: index {index} out of range for shape {shape:?}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        shape: [usize; 2],
    },
    #[error("empty input text after normalization")]
    EmptyText,
    #[error("degenerate input: query and title must each contribute at least one token")]
    DegenerateInput,
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    VocabMismatch { id: u32, vocab_size: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("invalid generator config: {0}")]
    InvalidGenConfig(String),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("unknown loss mode: {0}")]
    UnknownLossMode(String),
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error("non-finite loss (learning rate {lr}, epoch {epoch})")]
    NonFiniteLoss { lr: f64, epoch: usize },
    #[error("finite-difference oracle produced a non-finite value at {0}")]
    NonFiniteOracle(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("metric input length mismatch: {scores} scores vs {labels} labels")]
    MetricLengthMismatch { scores: usize, labels: usize },
    #[error("checkpoint version mismatch: file has {found}, this build reads {expected}")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("vocabulary fingerprint mismatch: checkpoint {in_file}, current vocab {current}")]
    FingerprintMismatch { in_file: String, current: String },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("malformed dataset line {line}: {msg}")]
    MalformedData { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
