//! Domain types shared by every stage of the pipeline.
//!
//! All of them are plain immutable values once constructed, so they can be
//! handed to concurrent Monte-Carlo workers without synchronization.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A real-valued sample stream `r[n]` in receiver units.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    samples: Vec<f64>,
    sample_period: f64,
}

impl SampleStream {
    /// Wraps samples, rejecting NaN and infinities.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        Self::with_period(samples, 1.0)
    }

    pub fn with_period(samples: Vec<f64>, sample_period: f64) -> Result<Self> {
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_period,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Sampling period in seconds. Informational only.
    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Splits the stream into `count` back-to-back, non-overlapping segments
    /// of `ns` stride-1 vectors of length `n`. Each segment consumes
    /// `n + ns - 1` samples.
    pub fn segments(&self, n: usize, ns: usize, count: usize) -> Result<Vec<SensingSegment<'_>>> {
        let span = segment_span(n, ns, 1);
        let required = span * count;
        if self.len() < required {
            return Err(Error::TooShort {
                required,
                actual: self.len(),
            });
        }
        (0..count)
            .map(|k| SensingSegment::new(self, k * span, n, ns))
            .collect()
    }

    /// Number of disjoint `(n, ns)` segments that fit in the stream.
    pub fn segment_capacity(&self, n: usize, ns: usize) -> usize {
        self.len() / segment_span(n, ns, 1).max(1)
    }
}

/// Samples consumed by `ns` vectors of length `n` taken every `stride` samples.
pub fn segment_span(n: usize, ns: usize, stride: usize) -> usize {
    if ns == 0 {
        return 0;
    }
    (ns - 1) * stride + n
}

/// Checks that a stream is finite and long enough to hold one `(n, ns)` segment.
pub fn validate_stream(stream: &SampleStream, n: usize, ns: usize) -> Result<()> {
    if let Some(i) = stream.samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteSample(i));
    }
    let required = segment_span(n, ns, 1);
    if stream.len() < required {
        return Err(Error::TooShort {
            required,
            actual: stream.len(),
        });
    }
    Ok(())
}

/// Validates a raw slice the same way [`validate_stream`] does.
pub fn validate_samples(samples: &[f64], n: usize, ns: usize) -> Result<()> {
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteSample(i));
    }
    let required = segment_span(n, ns, 1);
    if samples.len() < required {
        return Err(Error::TooShort {
            required,
            actual: samples.len(),
        });
    }
    Ok(())
}

/// A window of `ns` overlapping `n`-sample vectors `{r_i, ..., r_{i+ns-1}}`
/// starting at `start` in a borrowed stream.
#[derive(Debug, Clone, Copy)]
pub struct SensingSegment<'a> {
    stream: &'a SampleStream,
    start: usize,
    n: usize,
    ns: usize,
    stride: usize,
}

impl<'a> SensingSegment<'a> {
    pub fn new(stream: &'a SampleStream, start: usize, n: usize, ns: usize) -> Result<Self> {
        Self::with_stride(stream, start, n, ns, 1)
    }

    /// Like [`SensingSegment::new`] but with vectors taken every `stride`
    /// samples. Stride 1 gives the maximally overlapping windows used
    /// everywhere else in the crate.
    pub fn with_stride(
        stream: &'a SampleStream,
        start: usize,
        n: usize,
        ns: usize,
        stride: usize,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("vector length {n} < 2")));
        }
        if ns < 1 {
            return Err(Error::InvalidParameter("vector count must be >= 1".into()));
        }
        if stride < 1 {
            return Err(Error::InvalidParameter("stride must be >= 1".into()));
        }
        let required = start + segment_span(n, ns, stride);
        if stream.len() < required {
            return Err(Error::TooShort {
                required,
                actual: stream.len(),
            });
        }
        Ok(Self {
            stream,
            start,
            n,
            ns,
            stride,
        })
    }

    pub fn vector_len(&self) -> usize {
        self.n
    }

    pub fn vector_count(&self) -> usize {
        self.ns
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// The contiguous samples this segment covers.
    pub fn samples(&self) -> &'a [f64] {
        let end = self.start + segment_span(self.n, self.ns, self.stride);
        &self.stream.samples()[self.start..end]
    }

    /// Iterates the vectors `r_i` as slices into the stream.
    pub fn vectors(&self) -> impl Iterator<Item = &'a [f64]> + 'a {
        let samples = self.samples();
        let (n, stride) = (self.n, self.stride);
        (0..self.ns).map(move |i| &samples[i * stride..i * stride + n])
    }
}

/// Symmetric `n x n` sample covariance, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    n: usize,
    entries: Vec<f64>,
    vector_count: usize,
}

impl CovMatrix {
    /// Builds a matrix from its upper triangle (row-major, `a <= b`),
    /// mirroring it so the result is exactly symmetric.
    pub(crate) fn from_upper_triangle(n: usize, upper: &[f64], vector_count: usize) -> Self {
        debug_assert_eq!(upper.len(), n * (n + 1) / 2);
        let mut entries = vec![0.0; n * n];
        let mut k = 0;
        for a in 0..n {
            for b in a..n {
                entries[a * n + b] = upper[k];
                entries[b * n + a] = upper[k];
                k += 1;
            }
        }
        Self {
            n,
            entries,
            vector_count,
        }
    }

    /// Builds a matrix from explicit rows. Rows must be square, finite and
    /// exactly symmetric. Positive semidefiniteness is the caller's promise.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty matrix".into()));
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_entries(n, entries)
    }

    /// Row-major entries; same checks as [`CovMatrix::from_rows`].
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: entries.len(),
            });
        }
        if let Some(i) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        for a in 0..n {
            for b in (a + 1)..n {
                if entries[a * n + b] != entries[b * n + a] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            entries,
            vector_count: 0,
        })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut entries = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            entries[i * n + i] = *v;
        }
        Self::from_entries(n, entries)
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, value: f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = value;
        }
        Self {
            n,
            entries,
            vector_count: 0,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::scaled_identity(n, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of vectors averaged to form the estimate (0 for hand-built matrices).
    pub fn vector_count(&self) -> usize {
        self.vector_count
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `out = R x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.entries, self.n, x, out);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `x^T R x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.entries
            .chunks_exact(self.n)
            .zip(x)
            .map(|(row, xi)| xi * dot(row, x))
            .sum()
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|x| x * factor).collect(),
            vector_count: self.vector_count,
        }
    }

    /// `R + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.entries[i * self.n + i] += shift;
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn mat_vec(entries: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(entries.chunks_exact(n)) {
        *o = dot(row, x);
    }
}

/// A unit-norm, sign-canonical feature vector (a leading eigenvector).
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    values: Vec<f64>,
}

/// Tolerance on `| ||f|| - 1 |` accepted by [`Feature::from_unit`].
pub const UNIT_NORM_TOL: f64 = 1e-9;

impl Feature {
    /// Normalizes `values` to unit length and canonicalizes the sign.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty feature".into()));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        let len = norm(&values);
        if len == 0.0 {
            return Err(Error::InvalidParameter("zero-length feature".into()));
        }
        values.iter_mut().for_each(|x| *x /= len);
        canonicalize(&mut values);
        Ok(Self { values })
    }

    /// Accepts an already unit-norm vector without rescaling it, so persisted
    /// features load back bit for bit. Only the sign may change.
    pub fn from_unit(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty feature".into()));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        let len = norm(&values);
        if (len - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "feature norm {len} is not 1"
            )));
        }
        canonicalize(&mut values);
        Ok(Self { values })
    }

    /// The `k`-th standard basis vector of dimension `n`.
    pub fn basis(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::InvalidParameter(format!("basis index {k} >= {n}")));
        }
        let mut values = vec![0.0; n];
        values[k] = 1.0;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Flips the sign of `values` so its largest-magnitude component (the first
/// one, on ties) is non-negative.
pub fn canonicalize(values: &mut [f64]) {
    let mut pivot = 0;
    for (i, v) in values.iter().enumerate() {
        if v.abs() > values[pivot].abs() {
            pivot = i;
        }
    }
    if values.get(pivot).is_some_and(|v| *v < 0.0) {
        values.iter_mut().for_each(|x| *x = -*x);
    }
}

/// One eigenvalue with its eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Feature,
}

/// A full decomposition `R = Phi Lambda Phi^T`, eigenvalues descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub pairs: Vec<EigenPair>,
}

impl EigenSystem {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn max(&self) -> f64 {
        self.pairs.first().map_or(0.0, |p| p.value)
    }

    pub fn min(&self) -> f64 {
        self.pairs.last().map_or(0.0, |p| p.value)
    }
}

/// Which detector produced a statistic or owns a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorId {
    /// Per-vector estimator-correlator.
    Ec,
    /// Estimator-correlator averaged over a segment.
    EcAvg,
    Mme,
    Cav,
    Ftm,
}

impl DetectorId {
    pub const ALL: [DetectorId; 5] = [
        DetectorId::Ec,
        DetectorId::EcAvg,
        DetectorId::Mme,
        DetectorId::Cav,
        DetectorId::Ftm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorId::Ec => "EC",
            DetectorId::EcAvg => "EC_AVG",
            DetectorId::Mme => "MME",
            DetectorId::Cav => "CAV",
            DetectorId::Ftm => "FTM",
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EC" => Ok(DetectorId::Ec),
            "EC_AVG" => Ok(DetectorId::EcAvg),
            "MME" => Ok(DetectorId::Mme),
            "CAV" => Ok(DetectorId::Cav),
            "FTM" => Ok(DetectorId::Ftm),
            other => Err(Error::InvalidParameter(format!("unknown detector {other:?}"))),
        }
    }
}

/// A scalar test statistic tagged with the detector and inputs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorStatistic {
    pub detector: DetectorId,
    pub value: f64,
    pub params: Vec<(&'static str, f64)>,
}

impl DetectorStatistic {
    pub fn new(detector: DetectorId, value: f64) -> Self {
        Self {
            detector,
            value,
            params: Vec::new(),
        }
    }

    pub fn with_param(mut self, key: &'static str, value: f64) -> Self {
        self.params.push((key, value));
        self
    }
}

/// Binary sensing decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Noise only.
    H0,
    /// Signal present.
    H1,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        })
    }
}

/// Decision threshold `gamma` calibrated for a target false-alarm rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub detector: DetectorId,
    pub gamma: f64,
    pub target_pf: f64,
    pub calibration_trials: usize,
}

/// Smallest calibration size that leaves about ten null samples in the tail.
pub fn min_calibration_trials(target_pf: f64) -> usize {
    (10.0 / target_pf).ceil() as usize
}

impl Threshold {
    pub fn new(
        detector: DetectorId,
        gamma: f64,
        target_pf: f64,
        calibration_trials: usize,
    ) -> Result<Self> {
        if !(target_pf > 0.0 && target_pf < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target Pf {target_pf} outside (0, 1)"
            )));
        }
        let min = min_calibration_trials(target_pf);
        if calibration_trials < min {
            return Err(Error::InvalidParameter(format!(
                "{calibration_trials} calibration trials < {min} required for Pf {target_pf}"
            )));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidParameter("non-finite threshold".into()));
        }
        Ok(Self {
            detector,
            gamma,
            target_pf,
            calibration_trials,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_stream_accepts_long_enough_finite_stream() {
        let s = SampleStream::new((0..10).map(f64::from).collect()).unwrap();
        assert!(validate_stream(&s, 2, 4).is_ok());
    }

    #[test]
    fn validate_stream_reports_first_nan() {
        let mut v = vec![0.0; 10];
        v[3] = f64::NAN;
        v[7] = f64::INFINITY;
        assert_eq!(validate_samples(&v, 2, 4), Err(Error::NonFiniteSample(3)));
        assert_eq!(SampleStream::new(v), Err(Error::NonFiniteSample(3)));
    }

    #[test]
    fn validate_stream_reports_too_short() {
        let s = SampleStream::new(vec![0.0; 5]).unwrap();
        assert_eq!(
            validate_stream(&s, 32, 100),
            Err(Error::TooShort {
                required: 131,
                actual: 5
            })
        );
    }

    #[test]
    fn segment_vectors_overlap_with_stride_one() {
        let s = SampleStream::new((0..6).map(f64::from).collect()).unwrap();
        let seg = SensingSegment::new(&s, 1, 3, 3).unwrap();
        let v: Vec<_> = seg.vectors().collect();
        assert_eq!(v, vec![&[1.0, 2.0, 3.0][..], &[2.0, 3.0, 4.0], &[3.0, 4.0, 5.0]]);
        assert!(SensingSegment::new(&s, 2, 3, 3).is_err());
    }

    #[test]
    fn segment_rejects_degenerate_dimensions() {
        let s = SampleStream::new(vec![0.0; 10]).unwrap();
        assert!(SensingSegment::new(&s, 0, 1, 3).is_err());
        assert!(SensingSegment::new(&s, 0, 2, 0).is_err());
    }

    #[test]
    fn strided_segment_spacing() {
        let s = SampleStream::new((0..10).map(f64::from).collect()).unwrap();
        let seg = SensingSegment::with_stride(&s, 0, 2, 3, 4).unwrap();
        let firsts: Vec<f64> = seg.vectors().map(|v| v[0]).collect();
        assert_eq!(firsts, vec![0.0, 4.0, 8.0]);
    }

    #[test]
    fn matrix_rejects_asymmetry() {
        assert!(CovMatrix::from_rows(&[vec![1.0, 2.0], vec![2.5, 1.0]]).is_err());
        assert!(CovMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_ok());
    }

    #[test]
    fn feature_is_normalized_and_canonical() {
        let f = Feature::new(vec![0.0, -3.0, 4.0]).unwrap();
        assert_eq!(f.values(), &[0.0, -0.6, 0.8]);
        let g = Feature::new(vec![0.0, 3.0, -4.0]).unwrap();
        assert_eq!(f, g);
        assert!(Feature::new(vec![0.0, 0.0]).is_err());
        assert!(Feature::from_unit(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn threshold_requires_enough_trials() {
        assert!(Threshold::new(DetectorId::Cav, 1.1, 0.1, 99).is_err());
        assert!(Threshold::new(DetectorId::Cav, 1.1, 0.1, 100).is_ok());
        assert!(Threshold::new(DetectorId::Cav, 1.1, 0.0, 100).is_err());
        assert!(Threshold::new(DetectorId::Cav, 1.1, 1.0, 100).is_err());
    }

    #[test]
    fn detector_id_round_trips_through_text() {
        for id in DetectorId::ALL {
            assert_eq!(id.as_str().parse::<DetectorId>().unwrap(), id);
        }
        assert!("XYZ".parse::<DetectorId>().is_err());
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            let mut once = v.clone();
            canonicalize(&mut once);
            let mut twice = once.clone();
            canonicalize(&mut twice);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn canonical_pivot_is_non_negative(v in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            let mut c = v.clone();
            canonicalize(&mut c);
            let max = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let first = c.iter().find(|x| x.abs() == max).unwrap();
            prop_assert!(*first >= 0.0);
        }
    }
}
