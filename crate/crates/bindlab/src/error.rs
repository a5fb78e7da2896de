//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any bindlab stage.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (counts, dimensions, grids).
    #[error("configuration error: {0}")]
    Config(String),

    /// Benchmark generation could not satisfy its constraints.
    #[error("generation error: {0}")]
    Generation(String),

    /// Invalid input to a model forward or generation call.
    #[error("input error: {0}")]
    Input(String),

    /// An intervention spec does not fit the sequence or the model.
    #[error("intervention error: {0}")]
    Intervention(String),

    /// A softmax row had every causally reachable key masked.
    #[error("degenerate attention row: {0}")]
    DegenerateRow(String),

    /// A statistical test was asked to run on a degenerate sample.
    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    /// Checkpoint serialization or validation failed.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training diverged; carries the loss trace collected so far.
    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize, trace: Vec<(usize, f64)> },

    /// A report or artifact failed schema validation.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 for validation problems the caller
    /// can fix, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) | Error::Intervention(_) | Error::Schema(_) => 1,
            _ => 2,
        }
    }
}
