use std::path::PathBuf;

use thiserror::Error;

use crate::types::DetectorId;

/// Errors produced anywhere in the sensing pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("stream too short: need {required} samples, have {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {n} exceeds the supported maximum of {max}")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("covariance accumulator has not seen a complete vector")]
    EmptyAccumulator,

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("covariance is numerically singular (min eigenvalue {min:e}, max {max:e})")]
    SingularCovariance { min: f64, max: f64 },

    #[error("covariance diagonal is zero")]
    ZeroDiagonal,

    #[error("statistic from {statistic} compared against a {threshold} threshold")]
    DetectorMismatch {
        statistic: DetectorId,
        threshold: DetectorId,
    },

    #[error("feature learning needs at least 2 segments, got {0}")]
    InsufficientSegments(usize),

    #[error("malformed template at line {line}: {reason}")]
    MalformedTemplate { line: usize, reason: String },

    #[error("template dimension {0} out of range")]
    DimensionOutOfRange(usize),

    #[error("unstable signal model: AR coefficient {0} must satisfy |a| < 1")]
    UnstableModel(f64),

    #[error("cannot ingest {path}: {reason}")]
    FileIngest { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
