//! Feature similarity, blind feature learning, and template persistence.
//!
//! A feature is the unit leading eigenvector of a segment's covariance. For a
//! non-white stationary signal it barely moves from one segment to the next,
//! while for white noise it points somewhere new every time. Learning a
//! feature therefore only needs two consecutive segments whose features are
//! more similar than noise would plausibly make them.

use std::fs;
use std::path::Path;

use crate::covariance::sample_covariance;
use crate::eig::{leading_eigenvector, PowerIterConfig};
use crate::error::{Error, Result};
use crate::types::{Feature, SensingSegment};

/// Similarity threshold for clean, simulation-grade data.
pub const TE_SIMULATION: f64 = 0.90;
/// Similarity threshold preset for noisier over-the-air captures.
pub const TE_NOISY: f64 = 0.80;

/// Magic first line of a template file.
pub const TEMPLATE_MAGIC: &str = "specsense-feature v1";
/// Largest feature dimension a template file may declare.
pub const MAX_TEMPLATE_DIM: usize = 1 << 16;

/// Maximum over all `N` circular lags of the absolute cross-correlation
/// `|sum_k a[k] b[(k + l) mod N]|`.
///
/// Symmetric in its arguments, invariant to sign flips and circular shifts
/// of either one, and in `[0, 1]` for unit vectors.
pub fn similarity(a: &Feature, b: &Feature) -> Result<f64> {
    similarity_of(a.values(), b.values())
}

/// [`similarity`] on raw slices. Inputs are assumed unit norm.
pub fn similarity_of(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let mut best = 0.0f64;
    for lag in 0..n {
        let (head, tail) = b.split_at(lag);
        // b rotated left by `lag` is tail ++ head.
        let c: f64 = a[..n - lag].iter().zip(tail).map(|(x, y)| x * y).sum::<f64>()
            + a[n - lag..].iter().zip(head).map(|(x, y)| x * y).sum::<f64>();
        best = best.max(c.abs());
    }
    Ok(best.min(1.0))
}

/// Configuration for [`fla_learn`] and [`stability_experiment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlaConfig {
    /// Learning threshold `T_e` in `(0, 1)`.
    pub te: f64,
    /// Vector length N.
    pub n: usize,
    /// Vectors per segment Ns.
    pub ns: usize,
    pub power: PowerIterConfig,
}

impl FlaConfig {
    pub fn new(te: f64, n: usize, ns: usize) -> Result<Self> {
        let cfg = Self {
            te,
            n,
            ns,
            power: PowerIterConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.te > 0.0 && self.te < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "T_e = {} outside (0, 1)",
                self.te
            )));
        }
        if self.n < 2 || self.ns < 1 {
            return Err(Error::InvalidParameter("need n >= 2 and ns >= 1".into()));
        }
        self.power.validate()
    }
}

/// Outcome of a learning run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnReport {
    pub learned: bool,
    pub feature: Option<Feature>,
    /// Similarity of each consecutive pair examined, in order.
    pub rho_history: Vec<f64>,
    pub segments_processed: usize,
}

/// Outcome of a stability run over a sequence of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `rho[i]` compares segment `i` with segment `i + 1`.
    pub rhos: Vec<f64>,
    pub fraction_above_te: f64,
    /// Similarity between the first and last segment features.
    pub first_last_rho: f64,
    pub last_feature: Feature,
}

fn check_segments(segments: &[SensingSegment<'_>], cfg: &FlaConfig) -> Result<()> {
    cfg.validate()?;
    if segments.len() < 2 {
        return Err(Error::InsufficientSegments(segments.len()));
    }
    for seg in segments {
        if seg.vector_len() != cfg.n {
            return Err(Error::DimensionMismatch {
                expected: cfg.n,
                actual: seg.vector_len(),
            });
        }
        if seg.vector_count() != cfg.ns {
            return Err(Error::DimensionMismatch {
                expected: cfg.ns,
                actual: seg.vector_count(),
            });
        }
    }
    Ok(())
}

/// Leading-eigenvector feature of one segment.
pub fn segment_feature(segment: &SensingSegment<'_>, cfg: &PowerIterConfig) -> Result<Feature> {
    leading_eigenvector(&sample_covariance(segment), cfg).map(|(f, _)| f)
}

/// Blind feature learning over consecutive segment pairs.
///
/// For each pair `(i, i+1)` the two features and their similarity are
/// computed. The first pair whose similarity strictly exceeds `T_e` stops
/// the search and the later feature of the pair becomes the template.
pub fn fla_learn(segments: &[SensingSegment<'_>], cfg: &FlaConfig) -> Result<LearnReport> {
    check_segments(segments, cfg)?;
    let mut rho_history = Vec::with_capacity(segments.len() - 1);
    let mut previous = segment_feature(&segments[0], &cfg.power)?;
    for (i, seg) in segments.iter().enumerate().skip(1) {
        let current = segment_feature(seg, &cfg.power)?;
        let rho = similarity(&previous, &current)?;
        rho_history.push(rho);
        if rho > cfg.te {
            return Ok(LearnReport {
                learned: true,
                feature: Some(current),
                rho_history,
                segments_processed: i + 1,
            });
        }
        previous = current;
    }
    Ok(LearnReport {
        learned: false,
        feature: None,
        rho_history,
        segments_processed: segments.len(),
    })
}

/// Similarity of every consecutive segment pair, the fraction above `T_e`,
/// and the first-versus-last similarity.
pub fn stability_experiment(
    segments: &[SensingSegment<'_>],
    cfg: &FlaConfig,
) -> Result<StabilityReport> {
    check_segments(segments, cfg)?;
    let features = segments
        .iter()
        .map(|s| segment_feature(s, &cfg.power))
        .collect::<Result<Vec<_>>>()?;
    let rhos = features
        .windows(2)
        .map(|w| similarity(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    let above = rhos.iter().filter(|&&r| r > cfg.te).count();
    let first = &features[0];
    let last = features.last().expect("at least two segments");
    Ok(StabilityReport {
        fraction_above_te: above as f64 / rhos.len() as f64,
        first_last_rho: similarity(first, last)?,
        rhos,
        last_feature: last.clone(),
    })
}

/// Empirical `q`-quantile of a set of similarity values (nearest rank).
/// Handy for placing `T_e` at a chosen point of a noise-only null.
pub fn similarity_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter("empty sample or q outside [0, 1]".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Serializes a feature in the line-oriented template format.
pub fn format_template(f: &Feature) -> String {
    let mut out = String::with_capacity(32 + 26 * f.dim());
    out.push_str(TEMPLATE_MAGIC);
    out.push('\n');
    out.push_str(&format!("n={}\n", f.dim()));
    for v in f.values() {
        out.push_str(&format!("{v:.16e}\n"));
    }
    out.push_str("end\n");
    out
}

/// Parses the template format. Anything other than the exact layout
/// (magic, `n=<N>`, N values, `end`) is rejected.
pub fn parse_template(text: &str) -> Result<Feature> {
    let malformed = |line: usize, reason: &str| Error::MalformedTemplate {
        line,
        reason: reason.to_string(),
    };
    let body = text.strip_suffix('\n').unwrap_or(text);
    let lines: Vec<&str> = body.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    if lines.first() != Some(&TEMPLATE_MAGIC) {
        return Err(malformed(1, "missing header"));
    }
    let n: usize = lines
        .get(1)
        .and_then(|l| l.strip_prefix("n="))
        .ok_or_else(|| malformed(2, "expected n=<N>"))?
        .parse()
        .map_err(|_| malformed(2, "bad dimension"))?;
    if n == 0 || n > MAX_TEMPLATE_DIM {
        return Err(Error::DimensionOutOfRange(n));
    }
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let line_no = k + 3;
        let line = lines
            .get(k + 2)
            .ok_or_else(|| malformed(line_no, &format!("expected {n} values, found {k}")))?;
        if *line == "end" {
            return Err(malformed(line_no, &format!("expected {n} values, found {k}")));
        }
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| malformed(line_no, "not a number"))?;
        if !v.is_finite() {
            return Err(malformed(line_no, "non-finite value"));
        }
        values.push(v);
    }
    match lines.get(n + 2) {
        Some(&"end") => {}
        _ => return Err(malformed(n + 3, "expected end")),
    }
    if lines.len() > n + 3 {
        return Err(malformed(n + 4, "trailing content after end"));
    }
    Feature::from_unit(values).map_err(|e| malformed(2, &e.to_string()))
}

pub fn save_template(f: &Feature, path: &Path) -> Result<()> {
    fs::write(path, format_template(f)).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn load_template(path: &Path) -> Result<Feature> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_template(&text)
}
