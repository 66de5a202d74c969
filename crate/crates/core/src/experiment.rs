//! End-to-end Monte-Carlo experiments: detection-probability sweeps over
//! SNR, ROC curves, and feature-stability runs.
//!
//! A sweep follows a learn-then-detect protocol. The FTM template is learned
//! once from a high-SNR pre-run, thresholds are calibrated on noise-only
//! trials, and every SNR point then evaluates all detectors on the same
//! signal-plus-noise segments. EC is given the simulator's ground truth.

use std::fmt;
use std::str::FromStr;

use crate::calibration::{
    domain, exceedance_rate, null_covariances, signal_covariances, statistics, stream_id,
    threshold_from_statistics, TrialConfig,
};
use crate::detectors::{Detector, EcModel};
use crate::eig::PowerIterConfig;
use crate::error::{Error, Result};
use crate::feature_learning::{fla_learn, stability_experiment, FlaConfig, LearnReport, StabilityReport};
use crate::simgen::{add_noise, trial_rng, NoiseModel, SignalModel};
use crate::types::{segment_span, CovMatrix, DetectorId, Feature, SampleStream, Threshold};

/// Named `(N, Ns, trials)` bundles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Simulation scale: `N = 32`, `Ns = 10^5`, 1000 trials per point.
    PaperSim,
    /// Hardware covariance stage: `N = 32`, `Ns = 2^20`, 1000 trials per point.
    PaperHw,
    /// Laptop scale: `N = 32`, `Ns = 10^4`, 500 trials per point.
    Desk,
}

impl Preset {
    pub fn n(self) -> usize {
        32
    }

    pub fn ns(self) -> usize {
        match self {
            Preset::PaperSim => 100_000,
            Preset::PaperHw => 1 << 20,
            Preset::Desk => 10_000,
        }
    }

    pub fn trials(self) -> usize {
        match self {
            Preset::PaperSim | Preset::PaperHw => 1000,
            Preset::Desk => 500,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::PaperSim => "paper-sim",
            Preset::PaperHw => "paper-hw",
            Preset::Desk => "desk",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-sim" => Ok(Preset::PaperSim),
            "paper-hw" => Ok(Preset::PaperHw),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::InvalidParameter(format!("unknown preset {other:?}"))),
        }
    }
}

/// Default calibration size for thresholds.
pub const DEFAULT_CALIBRATION_TRIALS: usize = 2000;
/// SNR of the template-learning pre-run.
pub const DEFAULT_LEARN_SNR_DB: f64 = 20.0;

/// Power-iteration settings for Monte-Carlo loops. Noise-only covariances
/// have tightly clustered spectra, so the iteration budget is generous.
pub fn monte_carlo_power_config(seed: u64) -> PowerIterConfig {
    PowerIterConfig {
        max_iters: 100_000,
        residual_tol: 1e-10,
        seed,
    }
}

/// Full description of a Pd-versus-SNR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub signal: SignalModel,
    pub noise: NoiseModel,
    pub n: usize,
    pub ns: usize,
    /// Ascending SNR points in dB.
    pub snr_grid: Vec<f64>,
    /// Any of EC (segment-averaged), MME, CAV, FTM.
    pub detectors: Vec<DetectorId>,
    pub target_pf: f64,
    /// Signal trials per SNR point, also used for the fresh false-alarm check.
    pub trials: usize,
    pub calibration_trials: usize,
    pub seed: u64,
    pub power: PowerIterConfig,
    pub learn_snr_db: f64,
    pub te: f64,
    /// Upper bound on segments the template pre-run may consume.
    pub learn_segments: usize,
}

impl SweepConfig {
    /// Desk-scale defaults for a given source.
    pub fn desk(signal: SignalModel, snr_grid: Vec<f64>) -> Self {
        Self::from_preset(Preset::Desk, signal, snr_grid)
    }

    pub fn from_preset(preset: Preset, signal: SignalModel, snr_grid: Vec<f64>) -> Self {
        Self {
            signal,
            noise: NoiseModel { sigma2: 1.0 },
            n: preset.n(),
            ns: preset.ns(),
            snr_grid,
            detectors: vec![DetectorId::EcAvg, DetectorId::Ftm, DetectorId::Mme, DetectorId::Cav],
            target_pf: 0.1,
            trials: preset.trials(),
            calibration_trials: DEFAULT_CALIBRATION_TRIALS,
            seed: 1,
            power: monte_carlo_power_config(1),
            learn_snr_db: DEFAULT_LEARN_SNR_DB,
            te: crate::feature_learning::TE_SIMULATION,
            learn_segments: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_grid.is_empty() {
            return Err(Error::InvalidParameter("SNR grid is empty".into()));
        }
        if self.snr_grid.iter().any(|s| !s.is_finite()) || self.snr_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter("SNR grid must be finite and sorted".into()));
        }
        if self.detectors.is_empty() {
            return Err(Error::InvalidParameter("no detectors requested".into()));
        }
        if self.detectors.contains(&DetectorId::Ec) {
            return Err(Error::InvalidParameter(
                "sweeps use the segment-averaged EC; request EC_AVG (alias EC)".into(),
            ));
        }
        if self.n < 2 || self.ns < 1 || self.trials < 1 {
            return Err(Error::InvalidParameter("need n >= 2, ns >= 1, trials >= 1".into()));
        }
        if self.noise.sigma2 <= 0.0 {
            return Err(Error::InvalidParameter("sweeps need a positive noise variance".into()));
        }
        if self.learn_segments < 2 {
            return Err(Error::InvalidParameter("learn_segments must be >= 2".into()));
        }
        FlaConfig::new(self.te, self.n, self.ns)?;
        self.power.validate()
    }

    fn trial_config(&self, trials: usize) -> TrialConfig {
        TrialConfig {
            n: self.n,
            ns: self.ns,
            trials,
            seed: self.seed,
        }
    }
}

/// One `(snr, detector)` operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub detector: DetectorId,
    pub pd: f64,
    /// False-alarm rate on fresh noise at the threshold used for this row.
    pub pf_measured: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Learned FTM template, when FTM was requested.
    pub template: Option<Feature>,
    pub learn_report: Option<LearnReport>,
    /// Thresholds of the SNR-independent detectors.
    pub thresholds: Vec<Threshold>,
}

impl SweepReport {
    /// Lowest grid SNR at which `detector` reaches `pd >= target`.
    pub fn first_snr_reaching(&self, detector: DetectorId, target: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.detector == detector && r.pd >= target)
            .map(|r| r.snr_db)
            .reduce(f64::min)
    }

    pub fn pd(&self, detector: DetectorId, snr_db: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.detector == detector && r.snr_db == snr_db)
            .map(|r| r.pd)
    }
}

/// Learns a template from a high-SNR run of the sweep's source, one segment
/// at a time, stopping as soon as a consecutive pair matches.
pub fn learn_template(cfg: &SweepConfig) -> Result<LearnReport> {
    let span = segment_span(cfg.n, cfg.ns, 1);
    let mut samples = vec![0.0; span * cfg.learn_segments];
    let mut rng = trial_rng(cfg.seed, stream_id(domain::LEARNING, 0, 0));
    let power = cfg.signal.power_for(&cfg.noise, cfg.learn_snr_db);
    cfg.signal.add_to(&mut rng, power, &mut samples);
    add_noise(&mut rng, cfg.noise.sigma2, &mut samples);
    let stream = SampleStream::new(samples)?;
    let segments = stream.segments(cfg.n, cfg.ns, cfg.learn_segments)?;
    let fla = FlaConfig {
        te: cfg.te,
        n: cfg.n,
        ns: cfg.ns,
        power: cfg.power,
    };
    fla_learn(&segments, &fla)
}

fn ec_detector(cfg: &SweepConfig, snr_db: f64) -> Result<Detector> {
    let power = cfg.signal.power_for(&cfg.noise, snr_db);
    let rs = cfg.signal.signal_covariance(power, cfg.n, cfg.ns)?;
    Ok(Detector::Ec(EcModel::new(rs, cfg.noise.sigma2)?))
}

/// Blind detectors (everything but EC) for a sweep.
fn blind_detectors(cfg: &SweepConfig, template: Option<&Feature>) -> Vec<Detector> {
    cfg.detectors
        .iter()
        .filter_map(|id| match id {
            DetectorId::Mme => Some(Detector::Mme),
            DetectorId::Cav => Some(Detector::Cav),
            DetectorId::Ftm => template.cloned().map(Detector::Ftm),
            _ => None,
        })
        .collect()
}

struct Calibrated {
    threshold: Threshold,
    pf_measured: f64,
}

fn calibrate_on(
    detector: &Detector,
    calibration: &[CovMatrix],
    fresh: &[CovMatrix],
    cfg: &SweepConfig,
) -> Result<Calibrated> {
    let run = threshold_from_statistics(
        detector.id(),
        statistics(detector, calibration, &cfg.power)?,
        cfg.target_pf,
    )?;
    let pf_measured = exceedance_rate(&statistics(detector, fresh, &cfg.power)?, run.threshold.gamma);
    Ok(Calibrated {
        threshold: run.threshold,
        pf_measured,
    })
}

/// Runs a Pd-versus-SNR sweep.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let learn_report = if cfg.detectors.contains(&DetectorId::Ftm) {
        let report = learn_template(cfg)?;
        if !report.learned {
            return Err(Error::InvalidParameter(format!(
                "FTM template was not learned in {} segments at {} dB (last rho {:?})",
                report.segments_processed,
                cfg.learn_snr_db,
                report.rho_history.last()
            )));
        }
        Some(report)
    } else {
        None
    };
    let template = learn_report.as_ref().and_then(|r| r.feature.clone());

    let calibration = null_covariances(&cfg.noise, &cfg.trial_config(cfg.calibration_trials), domain::CALIBRATION)?;
    let fresh = null_covariances(&cfg.noise, &cfg.trial_config(cfg.trials), domain::FRESH_NULL)?;

    let blind = blind_detectors(cfg, template.as_ref());
    let blind_cal = blind
        .iter()
        .map(|d| calibrate_on(d, &calibration, &fresh, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(cfg.snr_grid.len() * cfg.detectors.len());
    for (k, &snr) in cfg.snr_grid.iter().enumerate() {
        let power = cfg.signal.power_for(&cfg.noise, snr);
        let alt = signal_covariances(
            &cfg.signal,
            power,
            &cfg.noise,
            &cfg.trial_config(cfg.trials),
            domain::SIGNAL,
            k as u64,
        )?;
        for id in &cfg.detectors {
            let (detector, cal) = if *id == DetectorId::EcAvg {
                let ec = ec_detector(cfg, snr)?;
                let cal = calibrate_on(&ec, &calibration, &fresh, cfg)?;
                (ec, cal)
            } else {
                let pos = blind.iter().position(|d| d.id() == *id).expect("blind detector built");
                let cal = &blind_cal[pos];
                (
                    blind[pos].clone(),
                    Calibrated {
                        threshold: cal.threshold.clone(),
                        pf_measured: cal.pf_measured,
                    },
                )
            };
            let pd = exceedance_rate(&statistics(&detector, &alt, &cfg.power)?, cal.threshold.gamma);
            rows.push(SweepRow {
                snr_db: snr,
                detector: *id,
                pd,
                pf_measured: cal.pf_measured,
                trials: cfg.trials,
            });
        }
    }

    Ok(SweepReport {
        rows,
        template,
        learn_report,
        thresholds: blind_cal.into_iter().map(|c| c.threshold).collect(),
    })
}

/// One point of an ROC curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RocPoint {
    pub detector: DetectorId,
    pub gamma: f64,
    pub pf: f64,
    pub pd: f64,
}

/// ROC curves at a single SNR. Null and signal statistics are computed once
/// and reused for every threshold on the grid.
pub fn run_roc(cfg: &SweepConfig, snr_db: f64, points: usize) -> Result<Vec<RocPoint>> {
    let single = SweepConfig {
        snr_grid: vec![snr_db],
        ..cfg.clone()
    };
    single.validate()?;
    if points < 2 {
        return Err(Error::InvalidParameter("ROC needs at least 2 points".into()));
    }
    let template = if cfg.detectors.contains(&DetectorId::Ftm) {
        let report = learn_template(cfg)?;
        Some(report.feature.ok_or_else(|| {
            Error::InvalidParameter("FTM template was not learned".into())
        })?)
    } else {
        None
    };
    let null = null_covariances(&cfg.noise, &cfg.trial_config(cfg.trials), domain::FRESH_NULL)?;
    let power = cfg.signal.power_for(&cfg.noise, snr_db);
    let alt = signal_covariances(&cfg.signal, power, &cfg.noise, &cfg.trial_config(cfg.trials), domain::SIGNAL, 0)?;
    let blind = blind_detectors(cfg, template.as_ref());

    let mut out = Vec::new();
    for id in &cfg.detectors {
        let detector = if *id == DetectorId::EcAvg {
            ec_detector(cfg, snr_db)?
        } else {
            blind.iter().find(|d| d.id() == *id).cloned().expect("blind detector built")
        };
        let h0 = statistics(&detector, &null, &cfg.power)?;
        let h1 = statistics(&detector, &alt, &cfg.power)?;
        let mut pooled: Vec<f64> = h0.iter().chain(&h1).copied().collect();
        pooled.sort_by(f64::total_cmp);
        for j in 0..points {
            let idx = j * (pooled.len() - 1) / (points - 1);
            let gamma = pooled[idx];
            out.push(RocPoint {
                detector: *id,
                gamma,
                pf: exceedance_rate(&h0, gamma),
                pd: exceedance_rate(&h1, gamma),
            });
        }
    }
    Ok(out)
}

/// Generates `segments` back-to-back segments of the source at `snr_db` and
/// runs the stability experiment on them.
pub fn synthetic_stability(
    signal: &SignalModel,
    noise: &NoiseModel,
    snr_db: f64,
    segments: usize,
    fla: &FlaConfig,
    seed: u64,
) -> Result<StabilityReport> {
    let span = segment_span(fla.n, fla.ns, 1);
    let mut samples = vec![0.0; span * segments];
    let mut rng = trial_rng(seed, stream_id(domain::LEARNING, 1, 0));
    signal.add_to(&mut rng, signal.power_for(noise, snr_db), &mut samples);
    if snr_db != f64::INFINITY {
        add_noise(&mut rng, noise.sigma2, &mut samples);
    }
    let stream = SampleStream::new(samples)?;
    stability_experiment(&stream.segments(fla.n, fla.ns, segments)?, fla)
}
