//! Resolution of command settings: built-in defaults, then the preset, then
//! the config file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use specsense::experiment::Preset;
use specsense::simgen::{SampleFormat, SignalModel};
use specsense::DetectorId;

use crate::CliError;

pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
}

macro_rules! keys {
    ($($name:literal => $help:literal),* $(,)?) => {
        &[$(Key { name: $name, help: $help }),*]
    };
}

pub const KEYS: &[Key] = keys![
    "preset" => "Parameter bundle: paper-sim, paper-hw or desk",
    "seed" => "Master random seed",
    "n" => "Vector length N",
    "ns" => "Vectors per sensing segment Ns",
    "sigma2" => "Noise variance",
    "signal" => "Source: ar1:<a>, sinusoid:<f>, fir:<t0,t1,...>, file:<path> or noise",
    "signal_format" => "Sample format of a file: source",
    "amplitude" => "Signal amplitude used when there is no noise",
    "snr" => "Signal-to-noise ratio in dB",
    "snr_grid" => "SNR points in dB: <start>:<stop>:<step> or a comma list",
    "segments" => "Number of sensing segments",
    "input" => "Sample file to process instead of a synthetic source",
    "input_format" => "Sample format of --input: f32le, i16le, cf32le, ci16le, csv",
    "te" => "Learning threshold on the feature similarity",
    "template" => "Feature template file",
    "threshold" => "Threshold file",
    "detector" => "Detector: MME, CAV or FTM",
    "detectors" => "Comma list of detectors: EC, FTM, MME, CAV",
    "target_pf" => "Target false-alarm probability",
    "trials" => "Monte-Carlo trials per operating point",
    "calibration_trials" => "Noise-only trials used to place each threshold",
    "learn_snr_db" => "SNR of the template pre-run",
    "learn_segments" => "Segment budget of the template pre-run",
    "points" => "Thresholds on the ROC grid",
    "output" => "Output path, or - for stdout",
];

pub fn key(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

/// Parses the flat `key = value` config format. Blank lines and lines
/// starting with `#` are ignored; dashes in keys are read as underscores.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::new(format!("config line {}: expected key=value", i + 1)))?;
        let k = k.trim().replace('-', "_");
        if k.is_empty() {
            return Err(CliError::new(format!("config line {}: empty key", i + 1)));
        }
        if out.iter().any(|(seen, _)| *seen == k) {
            return Err(CliError::new(format!("config line {}: duplicate key {k}", i + 1)));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

/// Fully resolved settings of one command.
pub struct Settings {
    command: &'static str,
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    /// `allowed` lists the keys the command understands; `defaults` must
    /// only name allowed keys.
    pub fn resolve(
        command: &'static str,
        allowed: &[&'static str],
        defaults: &[(&'static str, &str)],
        config: Option<&Path>,
        flags: Vec<(&'static str, String)>,
    ) -> Result<Self, CliError> {
        let file = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => Vec::new(),
        };
        let mut file_values = Vec::with_capacity(file.len());
        for (k, v) in file {
            let name = allowed
                .iter()
                .find(|a| **a == k)
                .ok_or_else(|| CliError::new(format!("config key {k:?} is not used by {command}")))?;
            file_values.push((*name, v));
        }

        let mut values: BTreeMap<&'static str, String> =
            defaults.iter().map(|(k, v)| (*k, v.to_string())).collect();

        let preset_name = flags
            .iter()
            .chain(&file_values)
            .find(|(k, _)| *k == "preset")
            .map(|(_, v)| v.clone())
            .or_else(|| values.get("preset").cloned());
        if let Some(name) = preset_name {
            let preset: Preset = name.parse()?;
            let bundle = [
                ("n", preset.n().to_string()),
                ("ns", preset.ns().to_string()),
                ("trials", preset.trials().to_string()),
            ];
            for (k, v) in bundle {
                if allowed.contains(&k) {
                    values.insert(k, v);
                }
            }
        }
        for (k, v) in file_values.into_iter().chain(flags) {
            values.insert(k, v);
        }
        Ok(Self {
            command,
            values,
        })
    }

    pub fn command(&self) -> &'static str {
        self.command
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::new(format!("{}: missing required setting {key}", self.command)))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.require(key)?;
        raw.trim()
            .parse()
            .map_err(|e| CliError::new(format!("{key}={raw}: {e}")))
    }

    /// The resolved settings on one line, keys sorted.
    pub fn describe(&self) -> String {
        let mut out = format!("specsense {}", self.command);
        for (k, v) in &self.values {
            let _ = write!(out, " {k}={v}");
        }
        out
    }

    pub fn signal(&self) -> Result<SignalModel, CliError> {
        let spec = self.require("signal")?.trim();
        let model = parse_signal(spec, self.get("signal_format"))?;
        match self.get("amplitude") {
            Some(_) => Ok(model.with_amplitude(self.parse("amplitude")?)),
            None => Ok(model),
        }
    }

    pub fn snr_grid(&self) -> Result<Vec<f64>, CliError> {
        parse_grid(self.require("snr_grid")?)
    }

    pub fn detectors(&self) -> Result<Vec<DetectorId>, CliError> {
        let mut out = Vec::new();
        for part in self.require("detectors")?.split(',') {
            let id = match part.parse::<DetectorId>()? {
                DetectorId::Ec => DetectorId::EcAvg,
                other => other,
            };
            if out.contains(&id) {
                return Err(CliError::new(format!("detector {id} listed twice")));
            }
            out.push(id);
        }
        Ok(out)
    }
}

pub fn parse_signal(spec: &str, file_format: Option<&str>) -> Result<SignalModel, CliError> {
    let bad = || CliError::new(format!("unrecognized signal {spec:?}"));
    if spec == "noise" || spec == "none" {
        return Ok(SignalModel::silent());
    }
    let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
    let number = |s: &str| -> Result<f64, CliError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::new(format!("signal {spec:?}: {s:?} is not a number")))
    };
    let model = match kind.trim() {
        "ar1" => SignalModel::ar1(number(arg)?)?,
        "sinusoid" => SignalModel::sinusoid(number(arg)?)?,
        "fir" => SignalModel::filtered_noise(arg.split(',').map(number).collect::<Result<_, _>>()?)?,
        "file" => {
            let format: SampleFormat = file_format.unwrap_or("f32le").parse()?;
            SignalModel::recorded(Path::new(arg), format)?
        }
        _ => return Err(bad()),
    };
    Ok(model)
}

/// `start:stop:step` (inclusive) or a comma list. The result must be sorted.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let number = |s: &str| -> Result<f64, CliError> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| CliError::new(format!("SNR grid {spec:?}: {s:?} is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::new(format!("SNR grid {spec:?}: non-finite point")))
        }
    };
    let grid = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::new(format!("SNR grid {spec:?}: expected start:stop:step")));
        }
        let (start, stop, step) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(CliError::new(format!("SNR grid {spec:?}: need step > 0 and stop >= start")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 10_000 {
            return Err(CliError::new(format!("SNR grid {spec:?}: too many points")));
        }
        (0..count).map(|k| start + k as f64 * step).collect()
    } else {
        spec.split(',').map(number).collect::<Result<Vec<_>, _>>()?
    };
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::new(format!("SNR grid {spec:?} must be strictly increasing")));
    }
    Ok(grid)
}
