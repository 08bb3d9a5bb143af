use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the checked entry points of this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite value {value} at component {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty vector: dimension must be at least 1")]
    EmptyVector,
    #[error("power exponent {0} outside (0, 1]")]
    InvalidExponent(f64),
    #[error("invalid interval [{lo}, {hi}]: need finite lo < hi")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Diverged(#[from] StepError),
}

/// Every hyperparameter violation found while validating an optimizer configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid optimizer configuration: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            f.write_str(v)?;
        }
        Ok(())
    }
}

impl core::error::Error for ConfigError {}

/// A step produced a non-finite gradient or parameter.
///
/// `step` is the 1-based index of the update that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("divergence at step {step}")]
pub struct StepError {
    pub step: u64,
}
