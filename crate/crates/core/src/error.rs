use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid depth frame: {0}")]
    InvalidFrame(String),

    #[error("invalid smoothing kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid lane path: {0}")]
    InvalidLane(String),

    #[error("invalid fusion table: {0}")]
    InvalidTable(String),

    #[error("invalid speed schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid world: {0}")]
    InvalidWorld(String),

    #[error("unknown scenario `{0}` (expected S1, S2 or S3)")]
    UnknownScenario(String),

    #[error("unknown pipeline mode `{0}` (expected global, local or fused)")]
    UnknownMode(String),

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("telemetry line {line}: {reason}")]
    Telemetry { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
