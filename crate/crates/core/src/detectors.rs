//! Test statistics and the threshold decision rule.
//!
//! | detector | statistic | knowledge needed |
//! |----------|-----------|------------------|
//! | EC       | `r^T R_s (R_s + s2 I)^-1 r` | signal covariance and noise variance |
//! | MME      | `lambda_max / lambda_min` | none |
//! | CAV      | `sum |r_ij| / sum |r_ii|` | none |
//! | FTM      | similarity of the leading eigenvector to a learned template | template |
//!
//! Every detector decides H1 when its statistic is strictly greater than the
//! calibrated threshold.

use crate::eig::{extreme_eigenvalues, leading_eigenvector, PowerIterConfig};
use crate::error::{Error, Result};
use crate::feature_learning::similarity;
use crate::types::{CovMatrix, DetectorId, DetectorStatistic, Feature, Hypothesis, SensingSegment, Threshold};

/// Ground-truth model for the estimator-correlator benchmark.
///
/// Holds the kernel `M = R_s (R_s + sigma2 I)^-1`, computed once through a
/// Cholesky factorization of `R_s + sigma2 I`.
#[derive(Debug, Clone, PartialEq)]
pub struct EcModel {
    signal_cov: CovMatrix,
    sigma2: f64,
    kernel: CovMatrix,
}

impl EcModel {
    pub fn new(signal_cov: CovMatrix, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance {sigma2} must be positive"
            )));
        }
        let n = signal_cov.dim();
        let chol = cholesky(signal_cov.shifted(sigma2).entries(), n)?;
        // X = A^-1 R_s column by column; R_s and A commute so X = M.
        let mut x = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = signal_cov.get(i, j);
            }
            cholesky_solve(&chol, n, &mut col);
            for i in 0..n {
                x[i * n + j] = col[i];
            }
        }
        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                kernel[i * n + j] = 0.5 * (x[i * n + j] + x[j * n + i]);
            }
        }
        Ok(Self {
            signal_cov,
            sigma2,
            kernel: CovMatrix::from_entries(n, kernel)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.signal_cov.dim()
    }

    pub fn signal_cov(&self) -> &CovMatrix {
        &self.signal_cov
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn kernel(&self) -> &CovMatrix {
        &self.kernel
    }
}

/// Lower-triangular Cholesky factor, row-major.
fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if d.is_nan() || d <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "R_s + sigma2 I is not positive definite".into(),
                    ));
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * b[k]).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| l[k * n + i] * b[k]).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Estimator-correlator statistic `r^T M r` for one vector.
pub fn ec_statistic(model: &EcModel, r: &[f64]) -> Result<f64> {
    if r.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: r.len(),
        });
    }
    Ok(model.kernel.quadratic_form(r))
}

/// Mean of [`ec_statistic`] over every vector of the segment.
pub fn ec_avg_statistic(model: &EcModel, segment: &SensingSegment<'_>) -> Result<f64> {
    if segment.vector_len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: segment.vector_len(),
        });
    }
    let total: f64 = segment.vectors().map(|v| model.kernel.quadratic_form(v)).sum();
    Ok(total / segment.vector_count() as f64)
}

/// The averaged EC statistic from the segment's sample covariance:
/// `(1/Ns) sum r_i^T M r_i = trace(M R)`. Equal to [`ec_avg_statistic`] up
/// to rounding, at `O(N^2)` instead of `O(Ns N^2)`.
pub fn ec_avg_from_covariance(model: &EcModel, r: &CovMatrix) -> Result<f64> {
    if r.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: r.dim(),
        });
    }
    Ok(model
        .kernel
        .entries()
        .iter()
        .zip(r.entries())
        .map(|(m, x)| m * x)
        .sum())
}

/// Max-to-min eigenvalue ratio.
pub fn mme_statistic(r: &CovMatrix, cfg: &PowerIterConfig) -> Result<f64> {
    let (max, min) = extreme_eigenvalues(r, cfg)?;
    if max.is_nan() || max <= 0.0 || min <= 1e-12 * max {
        return Err(Error::SingularCovariance { min, max });
    }
    Ok((max / min).max(1.0))
}

/// Covariance absolute value ratio `T1 / T2`.
pub fn cav_statistic(r: &CovMatrix) -> Result<f64> {
    let n = r.dim() as f64;
    let t1 = r.entries().iter().map(|x| x.abs()).sum::<f64>() / n;
    let t2 = (0..r.dim()).map(|i| r.get(i, i).abs()).sum::<f64>() / n;
    if t2 <= 1e-300 {
        return Err(Error::ZeroDiagonal);
    }
    Ok((t1 / t2).max(1.0))
}

/// Similarity between the segment's leading eigenvector and a stored template.
pub fn ftm_statistic(template: &Feature, r: &CovMatrix, cfg: &PowerIterConfig) -> Result<f64> {
    if template.dim() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: template.dim(),
            actual: r.dim(),
        });
    }
    let (current, _) = leading_eigenvector(r, cfg)?;
    similarity(&current, template)
}

/// H1 iff the statistic strictly exceeds the threshold.
pub fn decide(stat: &DetectorStatistic, threshold: &Threshold) -> Result<Hypothesis> {
    if stat.detector != threshold.detector {
        return Err(Error::DetectorMismatch {
            statistic: stat.detector,
            threshold: threshold.detector,
        });
    }
    Ok(if stat.value > threshold.gamma {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    })
}

/// A configured detector that turns a sample covariance into a statistic.
///
/// EC here is always the segment-averaged form; the per-vector form is only
/// available through [`ec_statistic`].
#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    Ec(EcModel),
    Mme,
    Cav,
    Ftm(Feature),
}

impl Detector {
    pub fn id(&self) -> DetectorId {
        match self {
            Detector::Ec(_) => DetectorId::EcAvg,
            Detector::Mme => DetectorId::Mme,
            Detector::Cav => DetectorId::Cav,
            Detector::Ftm(_) => DetectorId::Ftm,
        }
    }

    pub fn statistic(&self, r: &CovMatrix, cfg: &PowerIterConfig) -> Result<DetectorStatistic> {
        let value = match self {
            Detector::Ec(model) => ec_avg_from_covariance(model, r)?,
            Detector::Mme => mme_statistic(r, cfg)?,
            Detector::Cav => cav_statistic(r)?,
            Detector::Ftm(template) => ftm_statistic(template, r, cfg)?,
        };
        let stat = DetectorStatistic::new(self.id(), value)
            .with_param("n", r.dim() as f64)
            .with_param("ns", r.vector_count() as f64);
        Ok(match self {
            Detector::Ec(model) => stat.with_param("sigma2", model.sigma2()),
            _ => stat,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::sample_covariance;
    use crate::types::SampleStream;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn random_spd(n: usize, seed: u64) -> CovMatrix {
        let m = gaussian(n * n, seed);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum::<f64>()
                    + if i == j { 0.1 } else { 0.0 };
            }
        }
        CovMatrix::from_entries(n, a).unwrap()
    }

    /// Gaussian elimination with partial pivoting, independent of the
    /// Cholesky path.
    fn dense_solve(a: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = a[i * n..(i + 1) * n].to_vec();
                row.push(b[i]);
                row
            })
            .collect();
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
            m.swap(c, p);
            for r in (c + 1)..n {
                let f = m[r][c] / m[c][c];
                let pivot = m[c].clone();
                for (dst, src) in m[r][c..].iter_mut().zip(&pivot[c..]) {
                    *dst -= f * src;
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|k| m[i][k] * x[k]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn ec_with_zero_signal_is_zero() {
        let model = EcModel::new(CovMatrix::zeros(3), 1.0).unwrap();
        assert_eq!(ec_statistic(&model, &[1.0, -2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn ec_identity_signal_halves_energy() {
        let model = EcModel::new(CovMatrix::identity(2), 1.0).unwrap();
        assert!((ec_statistic(&model, &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ec_matches_linear_solve_oracle() {
        let rs = random_spd(4, 8);
        let model = EcModel::new(rs.clone(), 0.5).unwrap();
        let r = gaussian(4, 9);
        let x = dense_solve(rs.shifted(0.5).entries(), 4, &r);
        let expect: f64 = rs.mul_vec(&r).iter().zip(&x).map(|(a, b)| a * b).sum();
        let got = ec_statistic(&model, &r).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn ec_rejects_bad_inputs() {
        let model = EcModel::new(CovMatrix::identity(2), 1.0).unwrap();
        assert!(ec_statistic(&model, &[1.0]).is_err());
        assert!(EcModel::new(CovMatrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn ec_avg_single_vector_and_zero_segment() {
        let model = EcModel::new(random_spd(3, 1), 0.7).unwrap();
        let s = SampleStream::new(vec![0.3, -1.2, 2.0]).unwrap();
        let seg = SensingSegment::new(&s, 0, 3, 1).unwrap();
        assert_eq!(
            ec_avg_statistic(&model, &seg).unwrap(),
            ec_statistic(&model, &[0.3, -1.2, 2.0]).unwrap()
        );
        let z = SampleStream::new(vec![0.0; 12]).unwrap();
        let seg = SensingSegment::new(&z, 0, 3, 10).unwrap();
        assert_eq!(ec_avg_statistic(&model, &seg).unwrap(), 0.0);
    }

    #[test]
    fn ec_avg_is_mean_of_vector_statistics_and_trace_form() {
        let model = EcModel::new(random_spd(5, 2), 0.4).unwrap();
        let s = SampleStream::new(gaussian(204, 3)).unwrap();
        let seg = SensingSegment::new(&s, 0, 5, 200).unwrap();
        let mean = seg
            .vectors()
            .map(|v| ec_statistic(&model, v).unwrap())
            .sum::<f64>()
            / 200.0;
        let avg = ec_avg_statistic(&model, &seg).unwrap();
        assert!((avg - mean).abs() <= 1e-12 * mean.abs());
        let traced = ec_avg_from_covariance(&model, &sample_covariance(&seg)).unwrap();
        assert!((traced - avg).abs() <= 1e-12 * avg.abs());
    }

    #[test]
    fn mme_cases() {
        let cfg = PowerIterConfig::default();
        assert!((mme_statistic(&CovMatrix::scaled_identity(7, 2.0), &cfg).unwrap() - 1.0).abs() < 1e-12);
        let d = CovMatrix::diagonal(&[4.0, 1.0]).unwrap();
        assert!((mme_statistic(&d, &cfg).unwrap() - 4.0).abs() < 1e-9);
        let singular = CovMatrix::diagonal(&[4.0, 0.0]).unwrap();
        assert!(matches!(
            mme_statistic(&singular, &cfg),
            Err(Error::SingularCovariance { .. })
        ));
        assert!(mme_statistic(&CovMatrix::zeros(3), &cfg).is_err());
    }

    #[test]
    fn cav_cases() {
        assert_eq!(cav_statistic(&CovMatrix::diagonal(&[3.0, 1.0, 2.0]).unwrap()).unwrap(), 1.0);
        let ones = CovMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(cav_statistic(&ones).unwrap(), 2.0);
        assert_eq!(cav_statistic(&CovMatrix::zeros(2)), Err(Error::ZeroDiagonal));
    }

    #[test]
    fn ftm_matched_template() {
        let f = Feature::new(gaussian(6, 4)).unwrap();
        let v = f.values();
        let mut a = vec![0.0; 36];
        for i in 0..6 {
            for j in 0..6 {
                a[i * 6 + j] = 5.0 * (v[i] * v[j]) + if i == j { 1.0 } else { 0.0 };
            }
        }
        let r = CovMatrix::from_entries(6, a).unwrap();
        let stat = ftm_statistic(&f, &r, &PowerIterConfig::default()).unwrap();
        assert!(stat >= 1.0 - 1e-6);
    }

    #[test]
    fn ftm_aligns_shifted_basis_vectors() {
        let t = Feature::basis(2, 0).unwrap();
        let r = CovMatrix::diagonal(&[1.0, 5.0]).unwrap();
        let stat = ftm_statistic(&t, &r, &PowerIterConfig::default()).unwrap();
        assert!((stat - 1.0).abs() < 1e-9);
        assert!(ftm_statistic(&Feature::basis(3, 0).unwrap(), &r, &PowerIterConfig::default()).is_err());
    }

    #[test]
    fn decision_rule_is_strict() {
        let t = Threshold::new(DetectorId::Mme, 1.5, 0.1, 100).unwrap();
        let above = DetectorStatistic::new(DetectorId::Mme, 2.0);
        let tie = DetectorStatistic::new(DetectorId::Mme, 1.5);
        assert_eq!(decide(&above, &t).unwrap(), Hypothesis::H1);
        assert_eq!(decide(&tie, &t).unwrap(), Hypothesis::H0);
        let ftm = Threshold::new(DetectorId::Ftm, 0.5, 0.1, 100).unwrap();
        assert_eq!(
            decide(&above, &ftm),
            Err(Error::DetectorMismatch {
                statistic: DetectorId::Mme,
                threshold: DetectorId::Ftm
            })
        );
    }

    #[test]
    fn blind_statistics_are_scale_invariant_and_ec_scales_quadratically() {
        let cfg = PowerIterConfig::default();
        let x = gaussian(400, 5);
        let c = 3.7;
        let y: Vec<f64> = x.iter().map(|v| v * c).collect();
        let sx = SampleStream::new(x).unwrap();
        let sy = SampleStream::new(y).unwrap();
        let rx = sample_covariance(&SensingSegment::new(&sx, 0, 8, 393).unwrap());
        let ry = sample_covariance(&SensingSegment::new(&sy, 0, 8, 393).unwrap());
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        assert!(close(mme_statistic(&rx, &cfg).unwrap(), mme_statistic(&ry, &cfg).unwrap()));
        assert!(close(cav_statistic(&rx).unwrap(), cav_statistic(&ry).unwrap()));
        let t = Feature::new(gaussian(8, 6)).unwrap();
        assert!(close(ftm_statistic(&t, &rx, &cfg).unwrap(), ftm_statistic(&t, &ry, &cfg).unwrap()));
        let model = EcModel::new(random_spd(8, 7), 1.0).unwrap();
        let ex = ec_avg_from_covariance(&model, &rx).unwrap();
        let ey = ec_avg_from_covariance(&model, &ry).unwrap();
        assert!(close(ey, c * c * ex));
    }
}
