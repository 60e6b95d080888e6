use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, numeric, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Full-covariance multivariate Gaussian with a cached Cholesky factor.
///
/// Construction symmetrizes the covariance and, if the factorization fails,
/// adds `eps * I` with `eps = 1e-6 * mean(diag)` (escalating by 10x a few
/// times). The stored covariance is the one that was factorized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian", into = "RawGaussian")]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    /// Row-major lower Cholesky factor.
    chol: Vec<f64>,
    log_det: f64,
}

impl PartialEq for GaussianParams {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(invalid("gaussian dimension must be positive"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(invalid(format!(
                "covariance is {}x{} but mean has {} entries",
                cov.nrows(),
                cov.ncols(),
                d
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(numeric("gaussian parameters contain non-finite values"));
        }
        let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-9 * scale {
                    return Err(invalid("covariance is not symmetric"));
                }
            }
        }
        let mut cov = (&cov + cov.transpose()) * 0.5;

        let factor = match cov.clone().cholesky() {
            Some(c) => c,
            None => {
                let mean_diag = cov.diagonal().mean();
                let base = if mean_diag > 0.0 { mean_diag } else { 1.0 };
                let mut eps = 1e-6 * base;
                let mut found = None;
                for _ in 0..8 {
                    let reg = &cov + DMatrix::identity(d, d) * eps;
                    if let Some(c) = reg.clone().cholesky() {
                        log::debug!("covariance regularized with eps = {eps:e}");
                        cov = reg;
                        found = Some(c);
                        break;
                    }
                    eps *= 10.0;
                }
                found.ok_or_else(|| numeric("covariance is not positive definite"))?
            }
        };

        let l = factor.l();
        let mut chol = vec![0.0; d * d];
        let mut log_det = 0.0;
        for i in 0..d {
            for j in 0..=i {
                chol[i * d + j] = l[(i, j)];
            }
            log_det += 2.0 * l[(i, i)].ln();
        }
        Ok(Self { mean, cov, chol, log_det })
    }

    pub fn from_slices(mean: &[f64], cov_row_major: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov_row_major.len() != d * d {
            return Err(invalid("covariance length must be d*d"));
        }
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_row_slice(d, d, cov_row_major),
        )
    }

    /// Standard normal of dimension `d`.
    pub fn standard(d: usize) -> Self {
        Self::new(DVector::zeros(d), DMatrix::identity(d, d)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Lower Cholesky factor as a matrix.
    pub fn chol_factor(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.chol)
    }

    /// Log density, evaluated through the Cholesky factor.
    pub fn logpdf(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let mut buf = [0.0f64; 32];
        let mut heap;
        let z: &mut [f64] = if d <= 32 {
            &mut buf[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut maha = 0.0;
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i];
            let mut s = x[i] - self.mean[i];
            for (l, zj) in row.iter().zip(z.iter()) {
                s -= l * zj;
            }
            let zi = s / self.chol[i * d + i];
            z[i] = zi;
            maha += zi * zi;
        }
        -0.5 * (d as f64 * LN_2PI + self.log_det + maha)
    }

    /// Checked variant of [`logpdf`](Self::logpdf).
    pub fn try_logpdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(invalid(format!(
                "point has {} dimensions, gaussian has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.logpdf(x))
    }

    /// Maximum-likelihood fit (divides by the total weight).
    pub fn fit_weighted<'a, I>(rows: I, weights: &[f64]) -> Result<Self>
    where
        I: Iterator<Item = &'a [f64]> + Clone,
    {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(numeric("gaussian fit with zero total weight"));
        }
        let d = rows.clone().next().map(|r| r.len()).ok_or_else(|| invalid("no rows to fit"))?;
        let mut mean = DVector::zeros(d);
        for (r, &w) in rows.clone().zip(weights) {
            for j in 0..d {
                mean[j] += w * r[j];
            }
        }
        mean /= total;
        let mut cov = DMatrix::zeros(d, d);
        let mut c = vec![0.0; d];
        for (r, &w) in rows.zip(weights) {
            if w == 0.0 {
                continue;
            }
            for j in 0..d {
                c[j] = r[j] - mean[j];
            }
            for i in 0..d {
                let wi = w * c[i];
                for j in 0..=i {
                    cov[(i, j)] += wi * c[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..=i {
                let v = cov[(i, j)] / total;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Self::new(mean, cov)
    }

    /// Maximum-likelihood fit with unit weights.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let w = vec![1.0; rows.len()];
        Self::fit_weighted(rows.iter().map(Vec::as_slice), &w)
    }

    /// Moment-matched combination of weighted Gaussians.
    pub fn pooled(parts: &[(&GaussianParams, f64)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(_, w)| w).sum();
        if parts.is_empty() || !(total > 0.0) {
            return Err(invalid("pooling needs positive total weight"));
        }
        let d = parts[0].0.dim();
        let mut mean = DVector::zeros(d);
        for (g, w) in parts {
            mean += g.mean() * *w;
        }
        mean /= total;
        let mut cov = DMatrix::zeros(d, d);
        for (g, w) in parts {
            let diff = g.mean() - &mean;
            cov += (g.cov() + &diff * diff.transpose()) * *w;
        }
        cov /= total;
        Self::new(mean, cov)
    }
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    /// row-major
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGaussian {
    dim: usize,
    mean: Vec<f64>,
    cov: RawMatrix,
}

impl From<GaussianParams> for RawGaussian {
    fn from(g: GaussianParams) -> Self {
        let d = g.dim();
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push(g.cov[(i, j)]);
            }
        }
        RawGaussian {
            dim: d,
            mean: g.mean.iter().copied().collect(),
            cov: RawMatrix { rows: d, cols: d, data },
        }
    }
}

impl TryFrom<RawGaussian> for GaussianParams {
    type Error = crate::error::Error;

    fn try_from(raw: RawGaussian) -> Result<Self> {
        if raw.mean.len() != raw.dim
            || raw.cov.rows != raw.dim
            || raw.cov.cols != raw.dim
            || raw.cov.data.len() != raw.dim * raw.dim
        {
            return Err(crate::error::Error::Format("gaussian shape mismatch".into()));
        }
        GaussianParams::from_slices(&raw.mean, &raw.cov.data)
    }
}

/// KL(p || q) for two Gaussians of equal dimension.
///
/// Uses the closed form with the log-ratio of determinants; tiny negative
/// results from rounding are clamped to zero.
pub fn kl_gaussian(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    let d = p.dim();
    if q.dim() != d {
        return Err(invalid(format!("dimension mismatch: {} vs {}", d, q.dim())));
    }
    let lq = q.chol_factor();
    let lp = p.chol_factor();
    // tr(Sq^-1 Sp) = ||Lq^-1 Lp||_F^2
    let m = lq
        .solve_lower_triangular(&lp)
        .ok_or_else(|| numeric("singular covariance in KL divergence"))?;
    let trace = m.norm_squared();
    let diff = q.mean() - p.mean();
    let z = lq
        .solve_lower_triangular(&diff)
        .ok_or_else(|| numeric("singular covariance in KL divergence"))?;
    let maha = z.norm_squared();
    let kl = 0.5 * (trace - (p.log_det() - q.log_det()) - d as f64 + maha);
    if !kl.is_finite() {
        return Err(numeric("non-finite KL divergence"));
    }
    Ok(kl.max(0.0))
}

/// Symmetrized divergence, `(KL(p||q) + KL(q||p)) / 2`.
pub fn sym_kl_gaussian(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    Ok(0.5 * (kl_gaussian(p, q)? + kl_gaussian(q, p)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_gaussian(rng: &mut ChaCha8Rng, d: usize) -> GaussianParams {
        let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.5;
        let mean = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        GaussianParams::new(mean, cov).unwrap()
    }

    #[test]
    fn standard_normal_at_origin() {
        assert_abs_diff_eq!(GaussianParams::standard(1).logpdf(&[0.0]), -0.918_938_533_204_672_7, epsilon = 1e-12);
        assert_abs_diff_eq!(GaussianParams::standard(2).logpdf(&[0.0, 0.0]), -1.837_877_066_409_345_5, epsilon = 1e-12);
    }

    #[test]
    fn logpdf_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_gaussian(&mut rng, 3);
            let x: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
            let inv = g.cov().clone().try_inverse().unwrap();
            let diff = DVector::from_column_slice(&x) - g.mean();
            let quad = (diff.transpose() * inv * &diff)[(0, 0)];
            let direct = -0.5 * (3.0 * (2.0 * std::f64::consts::PI).ln() + g.cov().determinant().ln() + quad);
            assert_abs_diff_eq!(g.logpdf(&x), direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = GaussianParams::standard(2);
        assert!(g.try_logpdf(&[1.0]).is_err());
        assert!(kl_gaussian(&g, &GaussianParams::standard(3)).is_err());
        assert!(GaussianParams::from_slices(&[0.0, 0.0], &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn singular_covariance_is_regularized() {
        let g = GaussianParams::from_slices(&[0.0, 0.0], &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(g.logpdf(&[0.0, 0.0]).is_finite());
        assert!(g.cov()[(0, 0)] > 1.0);
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        assert!(GaussianParams::from_slices(&[0.0, 0.0], &[1.0, 0.5, 0.0, 1.0]).is_err());
    }

    #[test]
    fn kl_of_identical_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_gaussian(&mut rng, 4);
        assert!(kl_gaussian(&g, &g).unwrap() <= 1e-12);
    }

    #[test]
    fn kl_unit_shift() {
        let p = GaussianParams::from_slices(&[0.0], &[1.0]).unwrap();
        let q = GaussianParams::from_slices(&[1.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(kl_gaussian(&p, &q).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn kl_matches_direct_matrix_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = random_gaussian(&mut rng, 3);
            let q = random_gaussian(&mut rng, 3);
            let qi = q.cov().clone().try_inverse().unwrap();
            let diff = q.mean() - p.mean();
            let direct = 0.5
                * ((&qi * p.cov()).trace() - (p.cov().determinant() / q.cov().determinant()).ln() - 3.0
                    + (diff.transpose() * &qi * &diff)[(0, 0)]);
            assert_abs_diff_eq!(kl_gaussian(&p, &q).unwrap(), direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn pooled_moments_of_two_points() {
        let a = GaussianParams::from_slices(&[0.0], &[1.0]).unwrap();
        let b = GaussianParams::from_slices(&[4.0], &[2.0]).unwrap();
        let m = GaussianParams::pooled(&[(&a, 3.0), (&b, 1.0)]).unwrap();
        // mean = (0*3 + 4*1)/4 = 1; var = (3*(1 + 1) + 1*(2 + 9))/4 = 17/4
        assert_abs_diff_eq!(m.mean()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cov()[(0, 0)], 4.25, epsilon = 1e-12);
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_gaussian(&mut rng, 3);
        let s = serde_json::to_string(&g).unwrap();
        let back: GaussianParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.logpdf(&[0.1, 0.2, 0.3]).to_bits(), g.logpdf(&[0.1, 0.2, 0.3]).to_bits());
    }
}
