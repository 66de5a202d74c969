//! Eigen-solvers for symmetric covariance matrices.
//!
//! The production path only ever needs the leading eigenpair (the feature)
//! and the extreme eigenvalues (for the max/min ratio), so it uses power
//! iteration: one `O(N^2)` matrix-vector product per step. A cyclic Jacobi
//! solver provides the full decomposition as a reference for tests.
//!
//! Convergence is judged on the residual `||R v - lambda v|| <= tol * ||R||_F`.
//! Near-degenerate top eigenvalues then converge trivially (any vector in the
//! cluster has a small residual), but clustered spectra with a small but
//! non-negligible gap converge slowly. When the residual stops shrinking the
//! iteration switches to a squared working operator `R^(2^k)`, which has the
//! same eigenvectors and a geometrically larger spectral gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::types::{dot, mat_vec, norm, CovMatrix, EigenPair, EigenSystem, Feature};

/// Controls for power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterConfig {
    /// Matrix-vector products allowed before giving up.
    pub max_iters: usize,
    /// Residual tolerance relative to the Frobenius norm of the matrix.
    pub residual_tol: f64,
    /// Seed for the pseudo-random start vector.
    pub seed: u64,
}

impl Default for PowerIterConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            residual_tol: 1e-10,
            seed: 0x5eed,
        }
    }
}

impl PowerIterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if self.residual_tol.is_nan() || self.residual_tol <= 0.0 {
            return Err(Error::InvalidParameter("residual_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Iterations between progress checks.
const PROGRESS_WINDOW: usize = 16;
/// A window must at least halve the residual, else the operator is squared.
const PROGRESS_FACTOR: f64 = 0.5;
const MAX_SQUARINGS: usize = 40;
/// Relative margin added to the max eigenvalue before shifting for the min.
const SHIFT_MARGIN: f64 = 1e-6;
/// Largest dimension the Jacobi oracle accepts.
pub const ORACLE_MAX_DIM: usize = 64;

fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 0.0 {
            v.iter_mut().for_each(|x| *x /= len);
            return v;
        }
    }
}

/// `m <- m^2 / ||m^2||_F`, kept exactly symmetric.
fn square_normalized(m: &mut Vec<f64>, n: usize) {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row_i = &m[i * n..(i + 1) * n];
        for j in i..n {
            let row_j = &m[j * n..(j + 1) * n];
            let v = dot(row_i, row_j);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    let f = norm(&out);
    if f > 0.0 {
        out.iter_mut().for_each(|x| *x /= f);
    }
    *m = out;
}

/// Dominant eigenpair of a symmetric positive semidefinite row-major matrix.
fn dominant_pair(op: &[f64], n: usize, cfg: &PowerIterConfig) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    let scale = norm(op);
    let target = cfg.residual_tol * scale;
    let mut w = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    for attempt in 0..2u64 {
        let mut v = start_vector(n, cfg.seed.wrapping_add(attempt));
        let mut work: Option<Vec<f64>> = None;
        let mut squarings = 0;
        let mut window_start = f64::INFINITY;
        let mut in_window = 0;

        while iterations < cfg.max_iters {
            mat_vec(op, n, &v, &mut w);
            iterations += 1;
            let lambda = dot(&v, &w);
            residual = w
                .iter()
                .zip(&v)
                .map(|(wi, vi)| (wi - lambda * vi).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual <= target {
                return Ok((v, lambda));
            }

            in_window += 1;
            if in_window == PROGRESS_WINDOW {
                in_window = 0;
                if residual > PROGRESS_FACTOR * window_start {
                    if squarings == MAX_SQUARINGS {
                        // Out of acceleration: try a fresh start vector.
                        break;
                    }
                    let m = work.get_or_insert_with(|| op.to_vec());
                    square_normalized(m, n);
                    squarings += 1;
                }
                window_start = residual;
            }

            let step = match &work {
                Some(m) => {
                    mat_vec(m, n, &v, &mut next);
                    &next
                }
                None => &w,
            };
            let len = norm(step);
            if len == 0.0 {
                // v lies in the null space of the working operator.
                break;
            }
            for (vi, si) in v.iter_mut().zip(step) {
                *vi = si / len;
            }
        }
        if iterations >= cfg.max_iters {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations,
        residual,
    })
}

/// Leading eigenvector (as a canonical [`Feature`]) and its eigenvalue.
pub fn leading_eigenvector(r: &CovMatrix, cfg: &PowerIterConfig) -> Result<(Feature, f64)> {
    let (v, lambda) = dominant_pair(r.entries(), r.dim(), cfg)?;
    Ok((Feature::new(v)?, lambda))
}

/// Largest and smallest eigenvalues `(lambda_1, lambda_N)`.
///
/// The minimum comes from power iteration on `(lambda_1 (1 + 1e-6)) I - R`,
/// whose dominant eigenvalue is `shift - lambda_N`.
pub fn extreme_eigenvalues(r: &CovMatrix, cfg: &PowerIterConfig) -> Result<(f64, f64)> {
    let n = r.dim();
    let (_, lambda_max) = dominant_pair(r.entries(), n, cfg)?;
    let shift = lambda_max + SHIFT_MARGIN * lambda_max.abs();
    let shifted: Vec<f64> = r
        .entries()
        .iter()
        .enumerate()
        .map(|(k, x)| if k / n == k % n { shift - x } else { -x })
        .collect();
    let (_, mu) = dominant_pair(&shifted, n, cfg)?;
    Ok((lambda_max, shift - mu))
}

pub fn min_eigenvalue(r: &CovMatrix, cfg: &PowerIterConfig) -> Result<f64> {
    extreme_eigenvalues(r, cfg).map(|(_, min)| min)
}

/// Full eigendecomposition by cyclic Jacobi rotations.
///
/// Reference solver for tests and small matrices only (`N <= 64`). Sweeps
/// until the off-diagonal Frobenius mass is below `1e-12 ||R||_F`.
pub fn full_eigensystem_oracle(r: &CovMatrix) -> Result<EigenSystem> {
    let n = r.dim();
    if n > ORACLE_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            n,
            max: ORACLE_MAX_DIM,
        });
    }
    let mut a = r.entries().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let target = 1e-12 * r.frobenius_norm();

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut pairs = (0..n)
        .map(|j| {
            let column: Vec<f64> = (0..n).map(|k| v[k * n + j]).collect();
            Ok(EigenPair {
                value: a[j * n + j],
                vector: Feature::new(column)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    pairs.sort_by(|x, y| y.value.total_cmp(&x.value));
    Ok(EigenSystem { pairs })
}
