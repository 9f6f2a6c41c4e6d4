//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("column {column} is degenerate (constant): {context}")]
    DegenerateColumn { column: usize, context: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged (non-finite loss at epoch {epoch}); try a smaller learning rate")]
    TrainingDiverged { epoch: usize },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
