use std::path::Path;

use specsense::calibration::{calibrate, TrialConfig};
use specsense::covariance::covariance_of_slice;
use specsense::detectors::{decide, Detector};
use specsense::experiment::{monte_carlo_power_config, run_roc, run_sweep, synthetic_stability, SweepConfig};
use specsense::feature_learning::{fla_learn, load_template, save_template, stability_experiment, FlaConfig};
use specsense::simgen::{generate, ingest_file, NoiseModel, SampleFormat, SignalModel};
use specsense::types::segment_span;
use specsense::{DetectorId, Feature, SampleStream};

use crate::report::{fmt_float, Csv};
use crate::settings::Settings;
use crate::threshold_file::{load_threshold, save_threshold, ThresholdFile};
use crate::{CliError, Outcome};

pub struct CommandSpec {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: &'static [&'static str],
    pub defaults: &'static [(&'static str, &'static str)],
}

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "learn",
        about: "Learn a feature template with the feature learning algorithm",
        keys: &[
            "preset", "seed", "n", "ns", "sigma2", "signal", "signal_format", "amplitude", "snr", "segments",
            "input", "input_format", "te", "template", "output",
        ],
        defaults: &[
            ("preset", "desk"),
            ("seed", "1"),
            ("sigma2", "1"),
            ("signal", "ar1:0.9"),
            ("snr", "10"),
            ("segments", "20"),
            ("input_format", "f32le"),
            ("te", "0.9"),
            ("output", "-"),
        ],
    },
    CommandSpec {
        name: "sense",
        about: "Decide H0 or H1 for one sensing segment",
        keys: &[
            "seed", "sigma2", "signal", "signal_format", "amplitude", "snr", "input", "input_format", "detector",
            "template", "threshold", "output",
        ],
        defaults: &[
            ("seed", "1"),
            ("sigma2", "1"),
            ("snr", "0"),
            ("input_format", "f32le"),
            ("output", "-"),
        ],
    },
    CommandSpec {
        name: "calibrate",
        about: "Calibrate a detector threshold on noise-only segments",
        keys: &[
            "preset", "seed", "n", "ns", "sigma2", "detector", "template", "target_pf", "calibration_trials",
            "threshold", "output",
        ],
        defaults: &[
            ("preset", "desk"),
            ("seed", "1"),
            ("sigma2", "1"),
            ("target_pf", "0.1"),
            ("calibration_trials", "2000"),
            ("output", "-"),
        ],
    },
    CommandSpec {
        name: "sweep",
        about: "Detection probability versus SNR for several detectors",
        keys: &[
            "preset", "seed", "n", "ns", "sigma2", "signal", "signal_format", "amplitude", "snr_grid", "detectors",
            "target_pf", "trials", "calibration_trials", "learn_snr_db", "learn_segments", "te", "output",
        ],
        defaults: &[
            ("preset", "desk"),
            ("seed", "1"),
            ("sigma2", "1"),
            ("signal", "ar1:0.9"),
            ("snr_grid", "-24:-10:1"),
            ("detectors", "EC,FTM,MME,CAV"),
            ("target_pf", "0.1"),
            ("calibration_trials", "2000"),
            ("learn_snr_db", "20"),
            ("learn_segments", "20"),
            ("te", "0.9"),
            ("output", "-"),
        ],
    },
    CommandSpec {
        name: "stability",
        about: "Similarity of consecutive segment features over a long run",
        keys: &[
            "preset", "seed", "n", "ns", "sigma2", "signal", "signal_format", "amplitude", "snr", "segments",
            "input", "input_format", "te", "output",
        ],
        defaults: &[
            ("preset", "desk"),
            ("seed", "1"),
            ("sigma2", "1"),
            ("signal", "ar1:0.9"),
            ("snr", "10"),
            ("segments", "100"),
            ("input_format", "f32le"),
            ("te", "0.9"),
            ("output", "-"),
        ],
    },
    CommandSpec {
        name: "roc",
        about: "Pf and Pd over a threshold grid at one SNR",
        keys: &[
            "preset", "seed", "n", "ns", "sigma2", "signal", "signal_format", "amplitude", "snr", "detectors",
            "trials", "learn_snr_db", "learn_segments", "te", "points", "output",
        ],
        defaults: &[
            ("preset", "desk"),
            ("seed", "1"),
            ("sigma2", "1"),
            ("signal", "ar1:0.9"),
            ("snr", "-18"),
            ("detectors", "EC,FTM,MME,CAV"),
            ("learn_snr_db", "20"),
            ("learn_segments", "20"),
            ("te", "0.9"),
            ("points", "21"),
            ("output", "-"),
        ],
    },
];

pub fn run(s: &Settings) -> Result<Outcome, CliError> {
    match s.command() {
        "learn" => learn(s),
        "sense" => sense(s),
        "calibrate" => cmd_calibrate(s),
        "sweep" => sweep(s),
        "stability" => stability(s),
        "roc" => roc(s),
        other => Err(CliError::new(format!("unknown command {other}"))),
    }
}

fn noise(s: &Settings) -> Result<NoiseModel, CliError> {
    Ok(NoiseModel::new(s.parse("sigma2")?)?)
}

fn fla_config(s: &Settings) -> Result<FlaConfig, CliError> {
    let mut fla = FlaConfig::new(s.parse("te")?, s.parse("n")?, s.parse("ns")?)?;
    fla.power = monte_carlo_power_config(s.parse("seed")?);
    Ok(fla)
}

fn read_input(s: &Settings) -> Result<Option<SampleStream>, CliError> {
    match s.get("input") {
        Some(path) => {
            let format: SampleFormat = s.parse("input_format")?;
            Ok(Some(ingest_file(Path::new(path), format)?))
        }
        None => Ok(None),
    }
}

/// File input if given, else `segments` back-to-back synthetic segments.
fn segment_source(s: &Settings, n: usize, ns: usize) -> Result<(SampleStream, usize), CliError> {
    let wanted: usize = s.parse("segments")?;
    if let Some(stream) = read_input(s)? {
        let count = stream.segment_capacity(n, ns).min(wanted);
        return Ok((stream, count));
    }
    let span = segment_span(n, ns, 1);
    let length = span
        .checked_mul(wanted)
        .ok_or_else(|| CliError::new("segments * (n + ns - 1) overflows"))?;
    let g = generate(&s.signal()?, &noise(s)?, s.parse("snr")?, length, s.parse("seed")?)?;
    Ok((g.stream, wanted))
}

fn rho_rows(csv: &mut Csv, rhos: &[f64]) {
    for (k, rho) in rhos.iter().enumerate() {
        csv.row(&[(k + 1).to_string(), fmt_float(*rho)]);
    }
}

fn learn(s: &Settings) -> Result<Outcome, CliError> {
    let template_path = s.require("template")?.to_string();
    let fla = fla_config(s)?;
    let (stream, count) = segment_source(s, fla.n, fla.ns)?;
    let segments = stream.segments(fla.n, fla.ns, count)?;
    let report = fla_learn(&segments, &fla)?;

    let mut csv = Csv::new(&s.describe());
    csv.header("segment_index,rho");
    rho_rows(&mut csv, &report.rho_history);
    csv.comment(&format!(
        "learned={} segments_processed={}",
        report.learned, report.segments_processed
    ));
    match &report.feature {
        Some(feature) if report.learned => {
            save_template(feature, Path::new(&template_path))?;
            csv.write_to(s.require("output")?)?;
            Ok(Outcome::Success)
        }
        _ => {
            csv.write_to(s.require("output")?)?;
            Ok(Outcome::Negative)
        }
    }
}

fn blind_detector(id: DetectorId, s: &Settings, n: usize) -> Result<Detector, CliError> {
    match id {
        DetectorId::Mme => Ok(Detector::Mme),
        DetectorId::Cav => Ok(Detector::Cav),
        DetectorId::Ftm => {
            let path = s
                .get("template")
                .ok_or_else(|| CliError::new("FTM needs a template (--template)"))?;
            let template: Feature = load_template(Path::new(path))?;
            if template.dim() != n {
                return Err(CliError::new(format!(
                    "template has N = {} but the segment has N = {n}",
                    template.dim()
                )));
            }
            Ok(Detector::Ftm(template))
        }
        DetectorId::Ec | DetectorId::EcAvg => Err(CliError::new(
            "EC needs the true signal covariance; it is available in sweep and roc only",
        )),
    }
}

fn sense(s: &Settings) -> Result<Outcome, CliError> {
    let id: DetectorId = s.parse("detector")?;
    let file: ThresholdFile = load_threshold(Path::new(s.require("threshold")?))?;
    if file.threshold.detector != id {
        return Err(CliError::new(format!(
            "threshold file is for {} but {id} was requested",
            file.threshold.detector
        )));
    }
    let (n, ns) = (file.n, file.ns);
    let detector = blind_detector(id, s, n)?;
    let span = segment_span(n, ns, 1);
    let stream = match read_input(s)? {
        Some(stream) => stream,
        None => {
            if s.get("signal").is_none() {
                return Err(CliError::new("sense needs --input or a synthetic --signal"));
            }
            generate(&s.signal()?, &noise(s)?, s.parse("snr")?, span, s.parse("seed")?)?.stream
        }
    };
    if stream.len() < span {
        return Err(CliError::new(format!(
            "input has {} samples, one segment needs {span}",
            stream.len()
        )));
    }
    let r = covariance_of_slice(&stream.samples()[..span], n, ns)?;
    let stat = detector.statistic(&r, &monte_carlo_power_config(s.parse("seed")?))?;
    let decision = decide(&stat, &file.threshold)?;
    let line = format!(
        "{},{},{},{}\n",
        id,
        fmt_float(stat.value),
        fmt_float(file.threshold.gamma),
        decision
    );
    write_text(s.require("output")?, &line)?;
    Ok(Outcome::Success)
}

fn write_text(output: &str, text: &str) -> Result<(), CliError> {
    use std::io::Write;
    if output == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::new(format!("stdout: {e}")))
    } else {
        std::fs::write(output, text).map_err(|e| CliError::new(format!("{output}: {e}")))
    }
}

fn cmd_calibrate(s: &Settings) -> Result<Outcome, CliError> {
    let id: DetectorId = s.parse("detector")?;
    let threshold_path = s.require("threshold")?.to_string();
    let (n, ns): (usize, usize) = (s.parse("n")?, s.parse("ns")?);
    let detector = blind_detector(id, s, n)?;
    let seed: u64 = s.parse("seed")?;
    let cfg = TrialConfig {
        n,
        ns,
        trials: s.parse("calibration_trials")?,
        seed,
    };
    let run = calibrate(
        &detector,
        &noise(s)?,
        &cfg,
        s.parse("target_pf")?,
        &monte_carlo_power_config(seed),
    )?;
    let file = ThresholdFile {
        threshold: run.threshold,
        n,
        ns,
    };
    save_threshold(&file, Path::new(&threshold_path))?;
    let mut csv = Csv::new(&s.describe());
    csv.header("detector,gamma,target_pf,calibration_trials,n,ns");
    csv.row(&[
        id.to_string(),
        fmt_float(file.threshold.gamma),
        fmt_float(file.threshold.target_pf),
        file.threshold.calibration_trials.to_string(),
        n.to_string(),
        ns.to_string(),
    ]);
    csv.write_to(s.require("output")?)?;
    Ok(Outcome::Success)
}

fn sweep_config(s: &Settings, snr_grid: Vec<f64>) -> Result<SweepConfig, CliError> {
    let seed: u64 = s.parse("seed")?;
    let mut cfg = SweepConfig {
        signal: s.signal()?,
        noise: noise(s)?,
        n: s.parse("n")?,
        ns: s.parse("ns")?,
        snr_grid,
        detectors: s.detectors()?,
        trials: s.parse("trials")?,
        seed,
        power: monte_carlo_power_config(seed),
        learn_snr_db: s.parse("learn_snr_db")?,
        te: s.parse("te")?,
        learn_segments: s.parse("learn_segments")?,
        ..SweepConfig::desk(SignalModel::silent(), Vec::new())
    };
    // ROC draws its own threshold grid and has no calibration step.
    if s.get("target_pf").is_some() {
        cfg.target_pf = s.parse("target_pf")?;
        cfg.calibration_trials = s.parse("calibration_trials")?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep(s: &Settings) -> Result<Outcome, CliError> {
    let cfg = sweep_config(s, s.snr_grid()?)?;
    let report = run_sweep(&cfg)?;
    let mut csv = Csv::new(&s.describe());
    if let Some(learn) = &report.learn_report {
        csv.comment(&format!(
            "FTM template learned at {} dB after {} segments",
            fmt_float(cfg.learn_snr_db),
            learn.segments_processed
        ));
    }
    csv.header("snr_db,detector,pd,pf_measured,trials");
    for row in &report.rows {
        csv.row(&[
            fmt_float(row.snr_db),
            row.detector.to_string(),
            fmt_float(row.pd),
            fmt_float(row.pf_measured),
            row.trials.to_string(),
        ]);
    }
    csv.write_to(s.require("output")?)?;
    Ok(Outcome::Success)
}

fn roc(s: &Settings) -> Result<Outcome, CliError> {
    let snr: f64 = s.parse("snr")?;
    let cfg = sweep_config(s, vec![snr])?;
    let points = run_roc(&cfg, snr, s.parse("points")?)?;
    let mut csv = Csv::new(&s.describe());
    csv.header("detector,gamma,pf,pd");
    for p in &points {
        csv.row(&[p.detector.to_string(), fmt_float(p.gamma), fmt_float(p.pf), fmt_float(p.pd)]);
    }
    csv.write_to(s.require("output")?)?;
    Ok(Outcome::Success)
}

fn stability(s: &Settings) -> Result<Outcome, CliError> {
    let fla = fla_config(s)?;
    let report = match read_input(s)? {
        Some(stream) => {
            let count = stream.segment_capacity(fla.n, fla.ns).min(s.parse("segments")?);
            stability_experiment(&stream.segments(fla.n, fla.ns, count)?, &fla)?
        }
        None => synthetic_stability(
            &s.signal()?,
            &noise(s)?,
            s.parse("snr")?,
            s.parse("segments")?,
            &fla,
            s.parse("seed")?,
        )?,
    };
    let mut csv = Csv::new(&s.describe());
    csv.header("segment_index,rho");
    rho_rows(&mut csv, &report.rhos);
    csv.comment(&format!(
        "fraction_above_te={} first_last_rho={}",
        fmt_float(report.fraction_above_te),
        fmt_float(report.first_last_rho)
    ));
    csv.write_to(s.require("output")?)?;
    Ok(Outcome::Success)
}
