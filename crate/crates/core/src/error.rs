use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid size {n}: {reason}")]
    InvalidGrid { n: usize, reason: &'static str },

    #[error("grid mismatch: left operand has n={left}, right operand has n={right}")]
    GridMismatch { left: usize, right: usize },

    #[error("sample buffer has {got} values, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("field must have zero mean, found mean {mean:e}")]
    NonzeroMean { mean: f64 },

    #[error("velocity is not divergence-free: |div u| = {divergence:e}")]
    NotSolenoidal { divergence: f64 },

    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("time step {dt:e} violates the CFL limit; admissible dt is {admissible:e}")]
    CflViolation { dt: f64, admissible: f64 },

    #[error("{0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bad snapshot file: {0}")]
    Snapshot(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
