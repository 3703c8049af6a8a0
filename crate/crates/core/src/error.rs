use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A named configuration field failed validation.
    #[error("invalid value for `{field}`: {message}")]
    InvalidField { field: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cannot select {requested} examples, only {available} available")]
    Capacity { requested: usize, available: usize },

    #[error("index {index} is already labeled")]
    AlreadyLabeled { index: usize },

    #[error("index {index} appears more than once in the query")]
    DuplicateIndex { index: usize },

    #[error("index {index} is out of range for a pool of {len} examples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-numeric value {value:?} at line {line}, column {column}")]
    NonNumeric { line: u64, column: usize, value: String },

    #[error("label {label} at line {line} is outside [0, {num_classes})")]
    LabelOutOfRange { line: u64, label: i64, num_classes: usize },

    #[error("label column {0:?} not found in header")]
    UnknownColumn(String),

    #[error("training failed in round {round}: {source}")]
    Training {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_field(field: &str, message: impl Into<String>) -> Error {
    Error::InvalidField {
        field: field.to_owned(),
        message: message.into(),
    }
}
