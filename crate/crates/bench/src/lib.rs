//! Experiment harness and command line for power-gradient descent.
//!
//! The numerics live in [`power_gd_core`]; this crate adds what needs `std`:
//! seeded sampling and parallel sweeps ([`harness`]), the TOML experiment
//! file ([`config`]), CSV/JSON result files ([`output`]) and the `power-gd`
//! command ([`cli`]).

pub mod cli;
pub mod config;
pub mod harness;
pub mod output;

pub use power_gd_core;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] power_gd_core::Error),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Internal(String),
}

impl Error {
    /// Process exit code: 1 for usage and configuration errors, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Core(_) | Error::Config { .. } => 1,
            Error::Io { .. } | Error::Internal(_) => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
