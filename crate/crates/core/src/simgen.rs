//! Synthetic primary-user signals in white Gaussian noise, and ingestion of
//! recorded sample files.
//!
//! Every generator produces a unit-power, zero-mean, stationary signal which
//! is then scaled so that `10 log10(P_s / sigma2)` equals the requested SNR.
//! SNR is a per-sample power ratio over the full receiver bandwidth.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::covariance_of_slice;
use crate::error::{Error, Result};
use crate::types::{CovMatrix, SampleStream};

/// Reproducible generator for trial `index` of an experiment seeded with `seed`.
///
/// ChaCha is counter based, so each `(seed, index)` pair selects an
/// independent stream and trials can be produced in any order.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// How a sinusoid's phase is chosen per realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhasePolicy {
    /// Uniform on `[0, 2 pi)`, which makes the ensemble stationary.
    Random,
    /// Fixed phase in radians. Not stationary; for debugging.
    Fixed(f64),
}

/// Waveform family of the primary-user signal.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalKind {
    /// First-order autoregression `x[n] = a x[n-1] + e[n]`.
    Ar1 { a: f64 },
    /// Real tone at `freq` cycles per sample.
    Sinusoid { freq: f64, phase: PhasePolicy },
    /// White Gaussian noise through a static FIR channel.
    FilteredNoise { taps: Vec<f64> },
    /// Recorded samples, cycled when more are needed than the file holds.
    Recorded { source: PathBuf, samples: Arc<[f64]> },
}

/// Signal model: waveform plus the amplitude used when there is no noise
/// reference. An amplitude of zero turns the signal off.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    pub kind: SignalKind,
    pub amplitude: f64,
}

/// White Gaussian noise with variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance {sigma2}")));
        }
        Ok(Self { sigma2 })
    }
}

impl SignalModel {
    pub fn ar1(a: f64) -> Result<Self> {
        Self::new(SignalKind::Ar1 { a }, 1.0)
    }

    pub fn sinusoid(freq: f64) -> Result<Self> {
        Self::new(
            SignalKind::Sinusoid {
                freq,
                phase: PhasePolicy::Random,
            },
            1.0,
        )
    }

    pub fn filtered_noise(taps: Vec<f64>) -> Result<Self> {
        Self::new(SignalKind::FilteredNoise { taps }, 1.0)
    }

    /// Loads a recording to use as the clean signal.
    pub fn recorded(path: &Path, format: SampleFormat) -> Result<Self> {
        let stream = ingest_file(path, format)?;
        let samples: Arc<[f64]> = stream.samples().into();
        Self::new(
            SignalKind::Recorded {
                source: path.to_path_buf(),
                samples,
            },
            1.0,
        )
    }

    /// A model that never emits signal (noise-only hypothesis).
    pub fn silent() -> Self {
        Self {
            kind: SignalKind::Ar1 { a: 0.0 },
            amplitude: 0.0,
        }
    }

    pub fn new(kind: SignalKind, amplitude: f64) -> Result<Self> {
        match &kind {
            SignalKind::Ar1 { a } => {
                if a.is_nan() || a.abs() >= 1.0 {
                    return Err(Error::UnstableModel(*a));
                }
            }
            SignalKind::Sinusoid { freq, .. } => {
                if !(*freq > 0.0 && *freq < 0.5) {
                    return Err(Error::InvalidParameter(format!(
                        "sinusoid frequency {freq} outside (0, 0.5) cycles/sample"
                    )));
                }
            }
            SignalKind::FilteredNoise { taps } => {
                if taps.is_empty() || taps.iter().all(|t| *t == 0.0) {
                    return Err(Error::InvalidParameter("FIR taps must be non-empty and non-zero".into()));
                }
            }
            SignalKind::Recorded { source, samples } => {
                if samples.iter().all(|x| *x == 0.0) {
                    return Err(Error::FileIngest {
                        path: source.clone(),
                        reason: "recording has zero power".into(),
                    });
                }
            }
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidParameter("amplitude must be finite".into()));
        }
        Ok(Self { kind, amplitude })
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn is_silent(&self) -> bool {
        self.amplitude == 0.0
    }

    /// Signal power that meets `snr_db` against `noise`. With no noise or an
    /// infinite SNR the power is `amplitude^2`.
    pub fn power_for(&self, noise: &NoiseModel, snr_db: f64) -> f64 {
        if self.is_silent() {
            0.0
        } else if noise.sigma2 == 0.0 || snr_db == f64::INFINITY {
            self.amplitude * self.amplitude
        } else {
            noise.sigma2 * 10f64.powf(snr_db / 10.0)
        }
    }

    /// Normalized autocovariance `c(d)` of the unit-power signal.
    fn unit_autocovariance(&self, lag: usize) -> f64 {
        match &self.kind {
            SignalKind::Ar1 { a } => a.powi(lag as i32),
            SignalKind::Sinusoid { freq, .. } => (TAU * freq * lag as f64).cos(),
            SignalKind::FilteredNoise { taps } => {
                let energy: f64 = taps.iter().map(|t| t * t).sum();
                taps.iter()
                    .zip(taps.iter().skip(lag))
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    / energy
            }
            SignalKind::Recorded { .. } => unreachable!("recorded signals use the sample covariance"),
        }
    }

    /// Ground-truth `N x N` signal covariance at the given power.
    ///
    /// Analytic models use their autocovariance. A recording uses its own
    /// sample covariance over the first `n + ns - 1` (cycled) samples.
    pub fn signal_covariance(&self, power: f64, n: usize, ns: usize) -> Result<CovMatrix> {
        if power == 0.0 {
            return Ok(CovMatrix::zeros(n));
        }
        if let SignalKind::Recorded { samples, .. } = &self.kind {
            let needed = n + ns - 1;
            let scale = (power / mean_power(samples)).sqrt();
            let x: Vec<f64> = samples.iter().cycle().take(needed).map(|v| v * scale).collect();
            return covariance_of_slice(&x, n, ns);
        }
        let c: Vec<f64> = (0..n).map(|d| power * self.unit_autocovariance(d)).collect();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = c[i.abs_diff(j)];
            }
        }
        CovMatrix::from_entries(n, entries)
    }

    /// Adds `sqrt(power)` times a unit-power realization onto `out`.
    pub fn add_to<R: Rng>(&self, rng: &mut R, power: f64, out: &mut [f64]) {
        if power == 0.0 || out.is_empty() {
            return;
        }
        let gain = power.sqrt();
        match &self.kind {
            SignalKind::Ar1 { a } => {
                let drive = (1.0 - a * a).sqrt();
                let mut x: f64 = rng.sample(StandardNormal);
                out[0] += gain * x;
                for o in out.iter_mut().skip(1) {
                    let e: f64 = rng.sample(StandardNormal);
                    x = a * x + drive * e;
                    *o += gain * x;
                }
            }
            SignalKind::Sinusoid { freq, phase } => {
                let phi = match phase {
                    PhasePolicy::Random => rng.gen_range(0.0..TAU),
                    PhasePolicy::Fixed(p) => *p,
                };
                let amp = gain * std::f64::consts::SQRT_2;
                for (k, o) in out.iter_mut().enumerate() {
                    *o += amp * (TAU * freq * k as f64 + phi).cos();
                }
            }
            SignalKind::FilteredNoise { taps } => {
                let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
                let warm = taps.len() - 1;
                let e: Vec<f64> = (0..out.len() + warm).map(|_| rng.sample(StandardNormal)).collect();
                for (k, o) in out.iter_mut().enumerate() {
                    // y[k] = sum_j h[j] e[k - j], with e offset by the warm-up.
                    let y: f64 = taps.iter().enumerate().map(|(j, h)| h * e[k + warm - j]).sum();
                    *o += gain * y / norm;
                }
            }
            SignalKind::Recorded { samples, .. } => {
                let scale = gain / mean_power(samples).sqrt();
                for (o, s) in out.iter_mut().zip(samples.iter().cycle()) {
                    *o += scale * s;
                }
            }
        }
    }
}

fn mean_power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Adds white Gaussian noise of variance `sigma2` onto `out`.
pub fn add_noise<R: Rng>(rng: &mut R, sigma2: f64, out: &mut [f64]) {
    if sigma2 == 0.0 {
        return;
    }
    let sd = sigma2.sqrt();
    for o in out.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *o += sd * e;
    }
}

/// A generated stream together with the parameters an oracle detector needs.
#[derive(Debug, Clone)]
pub struct Generated {
    pub stream: SampleStream,
    /// Signal power actually used.
    pub signal_power: f64,
    /// Noise variance actually used (0 when noise was omitted).
    pub sigma2: f64,
}

/// Signal plus noise at `snr_db`. An SNR of `+inf` omits the noise.
///
/// Pair with [`SignalModel::signal_covariance`] (at `signal_power`) for the
/// ground-truth `R_s`.
pub fn generate(
    model: &SignalModel,
    noise: &NoiseModel,
    snr_db: f64,
    length: usize,
    seed: u64,
) -> Result<Generated> {
    if length < 1 {
        return Err(Error::InvalidParameter("length must be >= 1".into()));
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidParameter("SNR is NaN".into()));
    }
    let mut rng = trial_rng(seed, 0);
    let power = model.power_for(noise, snr_db);
    let sigma2 = if snr_db == f64::INFINITY { 0.0 } else { noise.sigma2 };
    let mut out = vec![0.0; length];
    model.add_to(&mut rng, power, &mut out);
    add_noise(&mut rng, sigma2, &mut out);
    Ok(Generated {
        stream: SampleStream::new(out)?,
        signal_power: power,
        sigma2,
    })
}

/// On-disk sample encodings accepted by [`ingest_file`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    /// Little-endian `f32`, one real sample each.
    F32Le,
    /// Little-endian `i16`, scaled by `1/32768` into `[-1, 1)`.
    I16Le,
    /// Interleaved little-endian `f32` I/Q pairs; only I is kept.
    Cf32Le,
    /// Interleaved little-endian `i16` I/Q pairs; only I is kept, scaled.
    Ci16Le,
    /// Decimal values separated by commas, whitespace or newlines.
    Csv,
}

impl SampleFormat {
    fn name(self) -> &'static str {
        match self {
            SampleFormat::F32Le => "f32le",
            SampleFormat::I16Le => "i16le",
            SampleFormat::Cf32Le => "cf32le",
            SampleFormat::Ci16Le => "ci16le",
            SampleFormat::Csv => "csv",
        }
    }
}

impl fmt::Display for SampleFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f32le" | "f32le_real" => Ok(SampleFormat::F32Le),
            "i16le" | "i16le_real" => Ok(SampleFormat::I16Le),
            "cf32le" => Ok(SampleFormat::Cf32Le),
            "ci16le" => Ok(SampleFormat::Ci16Le),
            "csv" => Ok(SampleFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown sample format {other:?}"))),
        }
    }
}

/// Reads a sample file into a validated real stream.
pub fn ingest_file(path: &Path, format: SampleFormat) -> Result<SampleStream> {
    let fail = |reason: String| Error::FileIngest {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = std::fs::read(path).map_err(|e| fail(e.to_string()))?;
    if bytes.is_empty() {
        return Err(fail("file is empty".into()));
    }
    let samples = decode(&bytes, format).map_err(fail)?;
    if samples.is_empty() {
        return Err(fail("no samples".into()));
    }
    SampleStream::new(samples)
}

fn decode(bytes: &[u8], format: SampleFormat) -> std::result::Result<Vec<f64>, String> {
    let (width, every) = match format {
        SampleFormat::F32Le => (4, 1),
        SampleFormat::I16Le => (2, 1),
        SampleFormat::Cf32Le => (4, 2),
        SampleFormat::Ci16Le => (2, 2),
        SampleFormat::Csv => return decode_csv(bytes),
    };
    let frame = width * every;
    if !bytes.len().is_multiple_of(frame) {
        return Err(format!(
            "{} bytes is not a whole number of {format} samples",
            bytes.len()
        ));
    }
    Ok(bytes
        .chunks_exact(frame)
        .map(|c| match width {
            4 => f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
            _ => i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0,
        })
        .collect())
}

fn decode_csv(bytes: &[u8]) -> std::result::Result<Vec<f64>, String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}
