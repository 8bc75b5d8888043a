//! Error types shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RevError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver diverged at iteration {iteration} (|pixel| > {guard:e})")]
    Divergence { iteration: usize, guard: f64 },

    #[error("denoiser plugin failed: {0}")]
    Plugin(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, RevError>;

impl RevError {
    pub fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        RevError::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 i/o, 4 divergence, 5 plugin.
    pub fn exit_code(&self) -> i32 {
        match self {
            RevError::Config(_) | RevError::InvalidArgument(_) | RevError::ShapeMismatch { .. } => 2,
            RevError::Io(_) | RevError::MalformedFile { .. } => 3,
            RevError::Divergence { .. } => 4,
            RevError::Plugin(_) => 5,
        }
    }
}
