use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading, validating or splitting corpora.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid UTF-8 at byte {offset}")]
    Decode { offset: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("character {ch:?} at position {position} is not in the vocabulary")]
    UnknownChar { ch: char, position: usize },
    #[error("id {0} is not in the vocabulary")]
    UnknownId(u32),
    #[error("max length must be at least 1")]
    ZeroLength,
}

/// Shape and domain failures inside the numeric layers.
#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range for size {size}")]
    OutOfRange { index: usize, size: usize },
    #[error("attention needs at least one unmasked timestep")]
    EmptyMask,
    #[error("non-finite loss {0}")]
    NonFinite(f64),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("truncated header")]
    TruncatedHeader,
    #[error("truncated tensor data: need {needed} bytes, found {found}")]
    TruncatedData { needed: usize, found: usize },
    #[error("manifest inconsistent with config: {0}")]
    Manifest(String),
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training samples")]
    NoSamples,
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty test set")]
    EmptyTestSet,
    #[error("ablation grid has no runs")]
    EmptyGrid,
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum GenerateError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid generation config: {0}")]
    Config(String),
}
