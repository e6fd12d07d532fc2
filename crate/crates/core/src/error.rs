use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("backward called on an empty tape (no forward pass recorded)")]
    EmptyTape,

    #[error("trainable parameter `{0}` has no gradient")]
    MissingGradient(String),

    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("invalid block spec: {0}")]
    InvalidSpec(String),

    #[error("unknown architecture `{0}`")]
    UnknownArchitecture(String),

    #[error("invalid loss input: {0}")]
    InvalidLossInput(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("metric undefined: {0}")]
    Undefined(&'static str),

    #[error("ensemble error: {0}")]
    Ensemble(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("class `{0}` has zero samples")]
    EmptyClass(&'static str),

    #[error("failed to decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("split counts sum to {requested} but corpus has {available} images")]
    CountMismatch { requested: usize, available: usize },

    #[error("corrupt record {index}: {reason}")]
    CorruptRecord { index: u64, reason: String },

    #[error("truncated file: expected {expected} records, last complete record is {}", last_complete.map_or("none".to_string(), |i| i.to_string()))]
    Truncated { expected: u64, last_complete: Option<u64> },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err<T>(op: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(Error::Shape {
        op,
        detail: detail.into(),
    })
}
