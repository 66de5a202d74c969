//! Spectrum sensing with blindly learned leading-eigenvector features.
//!
//! The crate turns a real-valued sample stream into sample covariance
//! matrices, extracts the leading eigenvector of each as a *feature*, learns
//! a stable feature blindly from consecutive segments, and detects a primary
//! user with four test statistics:
//!
//! * EC, the estimator-correlator, which needs the true signal covariance
//!   and noise variance and serves as an upper benchmark;
//! * MME, the max-to-min eigenvalue ratio, fully blind;
//! * CAV, the covariance absolute value ratio, fully blind;
//! * FTM, feature template matching against a learned feature.
//!
//! Thresholds are calibrated by Monte Carlo under the noise-only hypothesis.
//!
//! ```
//! use specsense::{covariance, eig, feature_learning, simgen};
//!
//! let source = simgen::SignalModel::ar1(0.9)?;
//! let noise = simgen::NoiseModel::new(1.0)?;
//! let g = simgen::generate(&source, &noise, 10.0, 2 * (8 + 2000 - 1), 7)?;
//! let segments = g.stream.segments(8, 2000, 2)?;
//! let cfg = feature_learning::FlaConfig::new(0.9, 8, 2000)?;
//! let report = feature_learning::fla_learn(&segments, &cfg)?;
//! assert!(report.learned);
//!
//! let r = covariance::sample_covariance(&segments[0]);
//! let (feature, lambda) = eig::leading_eigenvector(&r, &eig::PowerIterConfig::default())?;
//! assert!(lambda > 1.0 && feature.dim() == 8);
//! # Ok::<(), specsense::Error>(())
//! ```

pub mod calibration;
pub mod covariance;
pub mod detectors;
pub mod eig;
mod error;
pub mod experiment;
pub mod feature_learning;
pub mod simgen;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate_stream, CovMatrix, DetectorId, DetectorStatistic, EigenPair, EigenSystem, Feature,
    Hypothesis, SampleStream, SensingSegment, Threshold,
};
