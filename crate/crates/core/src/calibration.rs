//! Monte-Carlo threshold calibration and detection-rate estimation.
//!
//! Thresholds are empirical quantiles of the detector statistic under the
//! noise-only hypothesis, so every detector is calibrated the same way with
//! no distributional assumptions. Each trial draws a fresh, independent
//! segment from its own random stream `(seed, stream_id)`; calibration,
//! false-alarm checks and detection runs use disjoint stream domains.

use crate::covariance::covariance_of_slice;
use crate::detectors::Detector;
use crate::eig::PowerIterConfig;
use crate::error::{Error, Result};
use crate::simgen::{add_noise, trial_rng, NoiseModel, SignalModel};
use crate::types::{min_calibration_trials, segment_span, CovMatrix, DetectorId, Threshold};

/// Random-stream domains. A trial's stream id is
/// `domain << 56 | sub << 32 | trial_index`.
pub mod domain {
    pub const CALIBRATION: u64 = 1;
    pub const FRESH_NULL: u64 = 2;
    pub const SIGNAL: u64 = 3;
    pub const LEARNING: u64 = 4;
}

pub fn stream_id(domain: u64, sub: u64, index: u64) -> u64 {
    debug_assert!(sub < 1 << 24 && index < 1 << 32);
    (domain << 56) | (sub << 32) | index
}

/// Segment shape and trial budget for a Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub n: usize,
    pub ns: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Null statistics behind a calibrated threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRun {
    pub detector: DetectorId,
    /// Sorted ascending.
    pub null_statistics: Vec<f64>,
    pub threshold: Threshold,
}

/// 1-based order statistic `ceil((1 - pf) M)`, clamped to `[1, M]`.
pub fn quantile_index(target_pf: f64, m: usize) -> usize {
    // The small slack keeps exact products like 0.8 * 10 from rounding up.
    let k = ((1.0 - target_pf) * m as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(m)
}

/// Builds a threshold from null statistics at the `(1 - pf)` empirical quantile.
pub fn threshold_from_statistics(
    detector: DetectorId,
    mut statistics: Vec<f64>,
    target_pf: f64,
) -> Result<CalibrationRun> {
    let m = statistics.len();
    if !(target_pf > 0.0 && target_pf < 1.0) {
        return Err(Error::InvalidParameter(format!("target Pf {target_pf} outside (0, 1)")));
    }
    if m < min_calibration_trials(target_pf) {
        return Err(Error::InvalidParameter(format!(
            "{m} calibration trials < {} required for Pf {target_pf}",
            min_calibration_trials(target_pf)
        )));
    }
    if statistics.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("non-finite null statistic".into()));
    }
    statistics.sort_by(f64::total_cmp);
    let gamma = statistics[quantile_index(target_pf, m) - 1];
    Ok(CalibrationRun {
        detector,
        threshold: Threshold::new(detector, gamma, target_pf, m)?,
        null_statistics: statistics,
    })
}

/// One trial segment: optional signal at `power` plus noise, as a covariance.
#[allow(clippy::too_many_arguments)]
pub fn trial_covariance(
    signal: &SignalModel,
    power: f64,
    noise: &NoiseModel,
    n: usize,
    ns: usize,
    seed: u64,
    stream: u64,
    scratch: &mut Vec<f64>,
) -> Result<CovMatrix> {
    let len = segment_span(n, ns, 1);
    scratch.clear();
    scratch.resize(len, 0.0);
    let mut rng = trial_rng(seed, stream);
    signal.add_to(&mut rng, power, scratch);
    add_noise(&mut rng, noise.sigma2, scratch);
    covariance_of_slice(scratch, n, ns)
}

/// Covariances of `cfg.trials` independent noise-only segments drawn from
/// stream domain `domain`.
pub fn null_covariances(noise: &NoiseModel, cfg: &TrialConfig, domain: u64) -> Result<Vec<CovMatrix>> {
    signal_covariances(&SignalModel::silent(), 0.0, noise, cfg, domain, 0)
}

/// Covariances of independent signal-plus-noise segments at signal `power`.
pub fn signal_covariances(
    signal: &SignalModel,
    power: f64,
    noise: &NoiseModel,
    cfg: &TrialConfig,
    domain: u64,
    sub: u64,
) -> Result<Vec<CovMatrix>> {
    let mut scratch = Vec::new();
    (0..cfg.trials)
        .map(|i| {
            trial_covariance(
                signal,
                power,
                noise,
                cfg.n,
                cfg.ns,
                cfg.seed,
                stream_id(domain, sub, i as u64),
                &mut scratch,
            )
        })
        .collect()
}

/// Evaluates a detector over a batch of covariances.
pub fn statistics(detector: &Detector, covs: &[CovMatrix], power: &PowerIterConfig) -> Result<Vec<f64>> {
    covs.iter()
        .map(|r| detector.statistic(r, power).map(|s| s.value))
        .collect()
}

/// Calibrates `detector` on `cfg.trials` fresh noise-only segments.
pub fn calibrate(
    detector: &Detector,
    noise: &NoiseModel,
    cfg: &TrialConfig,
    target_pf: f64,
    power: &PowerIterConfig,
) -> Result<CalibrationRun> {
    if !(target_pf > 0.0 && target_pf < 1.0) {
        return Err(Error::InvalidParameter(format!("target Pf {target_pf} outside (0, 1)")));
    }
    if cfg.trials < min_calibration_trials(target_pf) {
        return Err(Error::InvalidParameter(format!(
            "{} calibration trials < {} required",
            cfg.trials,
            min_calibration_trials(target_pf)
        )));
    }
    let covs = null_covariances(noise, cfg, domain::CALIBRATION)?;
    threshold_from_statistics(detector.id(), statistics(detector, &covs, power)?, target_pf)
}

/// Fraction of statistics strictly above `gamma`.
pub fn exceedance_rate(statistics: &[f64], gamma: f64) -> f64 {
    if statistics.is_empty() {
        return 0.0;
    }
    statistics.iter().filter(|&&s| s > gamma).count() as f64 / statistics.len() as f64
}

/// Empirical false-alarm rate on fresh noise segments (disjoint from the
/// calibration streams).
pub fn measure_pf(
    detector: &Detector,
    threshold: &Threshold,
    noise: &NoiseModel,
    cfg: &TrialConfig,
    power: &PowerIterConfig,
) -> Result<f64> {
    check_pair(detector, threshold)?;
    let covs = null_covariances(noise, cfg, domain::FRESH_NULL)?;
    Ok(exceedance_rate(&statistics(detector, &covs, power)?, threshold.gamma))
}

/// Empirical detection probability at `snr_db`.
///
/// `sub` separates the random streams of different operating points.
#[allow(clippy::too_many_arguments)]
pub fn measure_pd(
    detector: &Detector,
    threshold: &Threshold,
    signal: &SignalModel,
    noise: &NoiseModel,
    snr_db: f64,
    cfg: &TrialConfig,
    sub: u64,
    power: &PowerIterConfig,
) -> Result<f64> {
    check_pair(detector, threshold)?;
    let p = signal.power_for(noise, snr_db);
    let covs = signal_covariances(signal, p, noise, cfg, domain::SIGNAL, sub)?;
    Ok(exceedance_rate(&statistics(detector, &covs, power)?, threshold.gamma))
}

fn check_pair(detector: &Detector, threshold: &Threshold) -> Result<()> {
    if detector.id() != threshold.detector {
        return Err(Error::DetectorMismatch {
            statistic: detector.id(),
            threshold: threshold.detector,
        });
    }
    Ok(())
}
