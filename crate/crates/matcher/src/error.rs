use thiserror::Error;

use aeos_core::{FormatError, SimError};

#[derive(Debug, Error)]
pub enum MatcherError {
    #[error("feature layout mismatch: {0}")]
    Layout(String),
    #[error("embedding dimension must be even, got {0}")]
    OddDimension(usize),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("assignment target {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("training diverged at iteration {iteration}: loss {loss}")]
    Divergence { iteration: usize, loss: f64 },
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
