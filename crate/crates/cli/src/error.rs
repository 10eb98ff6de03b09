use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}: invalid configuration at `{path}`: {message}")]
    Config {
        origin: String,
        path: String,
        message: String,
    },

    #[error("invalid override: {0}")]
    Override(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: malformed model file: {source}", path.display())]
    ModelFormat {
        path: PathBuf,
        #[source]
        source: serde_path_to_error::Error<serde_json::Error>,
    },

    #[error("unsupported model: {0}")]
    Model(String),

    #[error("data: {0}")]
    Data(String),

    #[error("compact model deviates from its source by {deviation:e} on the probe set (tolerance {tolerance:e})")]
    ProbeMismatch { deviation: f64, tolerance: f64 },

    #[error("{failed} of {total} probes have |z| above {threshold}")]
    VerificationFailed {
        failed: usize,
        total: usize,
        threshold: f64,
    },

    #[error(transparent)]
    Core(#[from] abnet::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 1 for a failed verification, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerificationFailed { .. } => 1,
            _ => 2,
        }
    }
}
