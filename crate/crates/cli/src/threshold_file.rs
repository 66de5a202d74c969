//! Line-oriented threshold files, laid out like feature templates:
//!
//! ```text
//! specsense-threshold v1
//! detector=CAV
//! gamma=1.0370000000000000e0
//! target_pf=0.1
//! trials=2000
//! n=32
//! ns=10000
//! end
//! ```

use std::fs;
use std::path::Path;

use specsense::{DetectorId, Threshold};

use crate::CliError;

pub const THRESHOLD_MAGIC: &str = "specsense-threshold v1";

const FIELDS: [&str; 6] = ["detector", "gamma", "target_pf", "trials", "n", "ns"];

/// A threshold together with the segment shape it was calibrated for.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdFile {
    pub threshold: Threshold,
    pub n: usize,
    pub ns: usize,
}

pub fn format_threshold(t: &ThresholdFile) -> String {
    format!(
        "{THRESHOLD_MAGIC}\ndetector={}\ngamma={:.16e}\ntarget_pf={}\ntrials={}\nn={}\nns={}\nend\n",
        t.threshold.detector, t.threshold.gamma, t.threshold.target_pf, t.threshold.calibration_trials, t.n, t.ns
    )
}

pub fn parse_threshold(text: &str) -> Result<ThresholdFile, CliError> {
    let bad = |line: usize, why: &str| CliError::new(format!("threshold file line {line}: {why}"));
    let lines: Vec<&str> = text.lines().collect();
    if lines.first() != Some(&THRESHOLD_MAGIC) {
        return Err(bad(1, "missing header"));
    }
    let mut values = [""; 6];
    for (k, field) in FIELDS.iter().enumerate() {
        let line = lines.get(k + 1).copied().unwrap_or("");
        values[k] = line
            .strip_prefix(field)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| bad(k + 2, &format!("expected {field}=<value>")))?;
    }
    if lines.get(7) != Some(&"end") {
        return Err(bad(8, "expected end"));
    }
    if lines.len() > 8 {
        return Err(bad(9, "trailing content after end"));
    }
    let detector: DetectorId = values[0].parse()?;
    let num = |k: usize| -> Result<f64, CliError> {
        values[k].parse().map_err(|_| bad(k + 2, "not a number"))
    };
    let int = |k: usize| -> Result<usize, CliError> {
        values[k].parse().map_err(|_| bad(k + 2, "not an integer"))
    };
    let threshold = Threshold::new(detector, num(1)?, num(2)?, int(3)?)?;
    let (n, ns) = (int(4)?, int(5)?);
    if n < 2 || ns < 1 {
        return Err(bad(6, "segment shape needs n >= 2 and ns >= 1"));
    }
    Ok(ThresholdFile { threshold, n, ns })
}

pub fn save_threshold(t: &ThresholdFile, path: &Path) -> Result<(), CliError> {
    fs::write(path, format_threshold(t)).map_err(|e| CliError::new(format!("{}: {e}", path.display())))
}

pub fn load_threshold(path: &Path) -> Result<ThresholdFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
    parse_threshold(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ThresholdFile {
        ThresholdFile {
            threshold: Threshold::new(DetectorId::Cav, 1.037_123_456_789, 0.1, 2000).unwrap(),
            n: 32,
            ns: 10_000,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let t = sample();
        assert_eq!(parse_threshold(&format_threshold(&t)).unwrap(), t);
    }

    #[test]
    fn rejects_damage() {
        let good = format_threshold(&sample());
        assert!(parse_threshold(&good.replace("end\n", "")).is_err());
        assert!(parse_threshold(&good.replace("v1", "v2")).is_err());
        assert!(parse_threshold(&good.replace("gamma=", "gama=")).is_err());
        assert!(parse_threshold(&good.replace("target_pf=0.1", "target_pf=0")).is_err());
        assert!(parse_threshold(&good.replace("CAV", "XYZ")).is_err());
        assert!(parse_threshold(&format!("{good}extra\n")).is_err());
        assert!(parse_threshold("").is_err());
    }
}
