//! Sample covariance `R = (1/Ns) sum r_i r_i^T` over a sensing segment.
//!
//! Two routes produce the same matrix: [`sample_covariance`] walks a stored
//! segment, and [`CovAccumulator`] consumes one sample at a time the way a
//! hardware front end would. Both feed the same compensated triangle sums
//! in the same order, so their results agree bit for bit.

use crate::error::{Error, Result};
use crate::types::{CovMatrix, SensingSegment};

/// Options for the batch covariance route.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CovOptions {
    /// Subtract the segment mean before forming outer products. Off by
    /// default since the sensing model is zero-mean; useful for real
    /// captures with a DC offset.
    pub demean: bool,
}

/// Kahan-compensated running sums of the upper triangle of `sum r r^T`.
#[derive(Debug, Clone)]
struct TriangleSums {
    n: usize,
    sums: Vec<f64>,
    carry: Vec<f64>,
}

impl TriangleSums {
    fn new(n: usize) -> Self {
        let len = n * (n + 1) / 2;
        Self {
            n,
            sums: vec![0.0; len],
            carry: vec![0.0; len],
        }
    }

    #[inline]
    fn add_outer(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.n);
        let mut offset = 0;
        for a in 0..self.n {
            let va = v[a];
            let width = self.n - a;
            let sums = &mut self.sums[offset..offset + width];
            let carry = &mut self.carry[offset..offset + width];
            for ((s, c), vb) in sums.iter_mut().zip(carry.iter_mut()).zip(&v[a..]) {
                let y = va * vb - *c;
                let t = *s + y;
                *c = (t - *s) - y;
                *s = t;
            }
            offset += width;
        }
    }

    fn finalize(&self, count: usize) -> CovMatrix {
        let scale = 1.0 / count as f64;
        let upper: Vec<f64> = self.sums.iter().map(|s| s * scale).collect();
        CovMatrix::from_upper_triangle(self.n, &upper, count)
    }
}

/// Batch sample covariance of a segment (no mean removal).
pub fn sample_covariance(segment: &SensingSegment<'_>) -> CovMatrix {
    sample_covariance_with(segment, CovOptions::default())
}

pub fn sample_covariance_with(segment: &SensingSegment<'_>, opts: CovOptions) -> CovMatrix {
    let n = segment.vector_len();
    let mut sums = TriangleSums::new(n);
    if opts.demean {
        let samples = segment.samples();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
        let stride = segment.stride();
        for i in 0..segment.vector_count() {
            sums.add_outer(&centered[i * stride..i * stride + n]);
        }
    } else {
        for v in segment.vectors() {
            sums.add_outer(v);
        }
    }
    sums.finalize(segment.vector_count())
}

/// Covariance of `ns` stride-1 vectors read straight from a slice. This is
/// the allocation-light path the Monte-Carlo loops use.
pub fn covariance_of_slice(samples: &[f64], n: usize, ns: usize) -> Result<CovMatrix> {
    crate::types::validate_samples(samples, n, ns)?;
    if n < 1 || ns < 1 {
        return Err(Error::InvalidParameter("n and ns must be >= 1".into()));
    }
    let mut sums = TriangleSums::new(n);
    for i in 0..ns {
        sums.add_outer(&samples[i..i + n]);
    }
    Ok(sums.finalize(ns))
}

/// Single-pass covariance accumulator fed one sample at a time.
///
/// Once `n` samples have arrived, every `stride`-th further sample completes
/// a new vector whose outer product is folded into the running sums.
#[derive(Debug, Clone)]
pub struct CovAccumulator {
    n: usize,
    stride: usize,
    sums: TriangleSums,
    // Last n samples written twice so the window is always one contiguous slice.
    ring: Vec<f64>,
    head: usize,
    samples_seen: usize,
    vectors_seen: usize,
}

impl CovAccumulator {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_stride(n, 1)
    }

    pub fn with_stride(n: usize, stride: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("vector length must be >= 1".into()));
        }
        if stride < 1 {
            return Err(Error::InvalidParameter("stride must be >= 1".into()));
        }
        Ok(Self {
            n,
            stride,
            sums: TriangleSums::new(n),
            ring: vec![0.0; 2 * n],
            head: 0,
            samples_seen: 0,
            vectors_seen: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn vectors_seen(&self) -> usize {
        self.vectors_seen
    }

    pub fn samples_seen(&self) -> usize {
        self.samples_seen
    }

    pub fn push(&mut self, sample: f64) -> Result<()> {
        if !sample.is_finite() {
            return Err(Error::NonFiniteSample(self.samples_seen));
        }
        self.ring[self.head] = sample;
        self.ring[self.head + self.n] = sample;
        self.head = (self.head + 1) % self.n;
        self.samples_seen += 1;
        if self.samples_seen >= self.n && (self.samples_seen - self.n).is_multiple_of(self.stride) {
            let window = &self.ring[self.head..self.head + self.n];
            self.sums.add_outer(window);
            self.vectors_seen += 1;
        }
        Ok(())
    }

    /// Pushes every sample of `samples`, stopping at the first non-finite one.
    pub fn extend_from_slice(&mut self, samples: &[f64]) -> Result<()> {
        samples.iter().try_for_each(|&x| self.push(x))
    }

    /// Divides the running sums by the number of vectors seen.
    pub fn finalize(&self) -> Result<CovMatrix> {
        if self.vectors_seen == 0 {
            return Err(Error::EmptyAccumulator);
        }
        Ok(self.sums.finalize(self.vectors_seen))
    }
}
