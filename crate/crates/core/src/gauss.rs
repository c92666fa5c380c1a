//! Gaussian analytics and reproducible sampling.
//!
//! The closed forms here are the expectations that arise when the limit law of
//! the lower-bound derivative is `N(0, sd^2)`:
//!
//! * [`expected_min_zero`]: `E[min{X, 0}]` for `X ~ N(mean, sd^2)`;
//! * [`f_obj`]: the regret criterion `min{s, 0} - E[min{Z + w + s, 0}]`;
//! * [`g_obj`]: the squared-error criterion
//!   `E[(min{Z + w + s, 0} - min{s, 0})^2]`, with `Z ~ N(0, sd^2)`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

fn check_sd(sd: f64) -> Result<()> {
    if sd > 0.0 && sd.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("standard deviation must be positive, got {sd}")))
    }
}

/// `E[min{X, 0}]` for `X ~ N(mean, sd^2)`.
pub fn expected_min_zero(mean: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    let z = mean / sd;
    Ok(-sd * std_normal_pdf(z) + mean * std_normal_cdf(-z))
}

/// Regret criterion `F(w, s) = min{s, 0} - E[min{Z + w + s, 0}]`.
pub fn f_obj(w: f64, s: f64, sd: f64) -> Result<f64> {
    Ok(s.min(0.0) - expected_min_zero(w + s, sd)?)
}

/// Squared-error criterion `G(w, s)`.
pub fn g_obj(w: f64, s: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    if s >= 0.0 {
        let m = w + s;
        let z = m / sd;
        Ok((m * m + sd * sd) * std_normal_cdf(-z) - m * sd * std_normal_pdf(z))
    } else {
        // E[Y^2 1{Y < -s}] with Y ~ N(w, sd^2), plus s^2 P(Y >= -s)
        let c = -s;
        let a = (c - w) / sd;
        let truncated_second_moment = (w * w + sd * sd) * std_normal_cdf(a) - sd * (w + c) * std_normal_pdf(a);
        Ok(truncated_second_moment + s * s * std_normal_cdf(-a))
    }
}

/// `sup_s G(w, s) = w^2 + sd^2`.
pub fn g_sup_s(w: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    Ok(w * w + sd * sd)
}

/// Derivative of `F(w, 0)` in `w`: `Phi(w / sd) - 1`.
pub fn f_obj_dw_at_zero(w: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    Ok(std_normal_cdf(w / sd) - 1.0)
}

/// Seed and stream id of an independent random-number stream.
///
/// Streams are ChaCha8 keystreams: `seed` fixes the key and `stream` selects
/// one of `2^64` non-overlapping sequences, so per-task streams can be derived
/// without coordination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededStream {
    pub seed: u64,
    pub stream: u64,
}

impl SeededStream {
    pub const fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Stream for a tuple of task coordinates (e.g. grid index, replication,
    /// purpose). Distinct tuples give distinct stream ids.
    pub fn derive(seed: u64, coords: &[u64]) -> Self {
        let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
        for &c in coords {
            h = splitmix64(h ^ splitmix64(c.wrapping_add(0x2545_F491_4F6C_DD1D)));
        }
        Self { seed, stream: h }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean-zero multivariate normal law.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    cov: DMatrix<f64>,
}

impl GaussianLaw {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::Domain("covariance must be square".into()));
        }
        let n = cov.nrows();
        for i in 0..n {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Domain(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        if n > 0 {
            let min_eig = cov.clone().symmetric_eigen().eigenvalues.min();
            if min_eig < -1e-10 {
                return Err(Error::NotPsd);
            }
        }
        Ok(Self { cov })
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(variances)))
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular factor `L` with `L L^T` equal to the covariance, up to
    /// a diagonal jitter of `10^-12 trace / dim` added on up to three retries.
    pub fn factor(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let trace = self.cov.trace();
        if n == 0 || trace == 0.0 {
            return Ok(DMatrix::zeros(n, n));
        }
        let jitter = 1e-12 * trace / n as f64;
        let mut cov = self.cov.clone();
        for attempt in 0..=3 {
            if let Some(ch) = cov.clone().cholesky() {
                return Ok(ch.l());
            }
            if attempt < 3 {
                for i in 0..n {
                    cov[(i, i)] += jitter;
                }
            }
        }
        Err(Error::NotPsd)
    }
}

/// `count` independent draws from `law`, deterministic given `stream`.
pub fn mvn_sample(law: &GaussianLaw, stream: SeededStream, count: usize) -> Result<Vec<Vec<f64>>> {
    let l = law.factor()?;
    let k = law.dim();
    let mut rng = stream.rng();
    let mut z = vec![0.0; k];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let draw = (0..k).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect();
        out.push(draw);
    }
    Ok(out)
}
