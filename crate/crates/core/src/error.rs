//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range for {what} of size {size}")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("inconsistent hierarchy: {0}")]
    Inconsistency(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stratification impossible: class '{class}' has {count} sample(s), need at least 2")]
    Stratification { class: String, count: usize },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("label '{0}' not found in embedding table and stub fallback is disabled")]
    Lookup(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("evaluation produced a non-finite value: {0}")]
    Evaluation(String),

    #[error("non-finite loss in batch {batch}: geo={geo} scene={scene} tla={tla}")]
    NonFiniteLoss {
        batch: usize,
        geo: f64,
        scene: f64,
        tla: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for structured CLI output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Index { .. } => "index",
            Error::EmptyInput(_) => "empty_input",
            Error::Inconsistency(_) => "inconsistency",
            Error::Config(_) => "config",
            Error::Stratification { .. } => "stratification",
            Error::Format { .. } => "format",
            Error::Lookup(_) => "lookup",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::Evaluation(_) => "evaluation",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
