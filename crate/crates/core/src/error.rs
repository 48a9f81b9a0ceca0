use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },

    #[error("{}:{line}: {message}", path.display())]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(
        "{context}: non-uniform sampling at sample {index}: step {step}s, expected {expected}s"
    )]
    NonUniformSampling {
        context: String,
        index: usize,
        step: f64,
        expected: f64,
    },

    #[error("dataset {dataset_id}: user {user_id} has no session {missing}")]
    Unpaired {
        dataset_id: String,
        user_id: String,
        missing: String,
    },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("input too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported resampling ratio: {0}")]
    UnsupportedRatio(String),

    #[error("output directory {} exists and is not empty (use force to overwrite)", .0.display())]
    OutputExists(PathBuf),

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than bad arguments or I/O.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Serialization(_))
    }
}
