//! Analytic score oracles: exact scores of known perturbed densities, plus a
//! deterministic noise-corrupted wrapper standing in for an imperfect model.

use crate::error::{Error, Result};
use crate::rng::{hash_seed, hashed_normal_vec};

/// Coefficients of an affine score: score(x, sigma) = a * x + b, with the
/// same scalar `a` on every component (isotropic).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineScore {
    pub a: f64,
    pub b: Vec<f64>,
}

pub trait ScoreOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// Score estimate s(x, sigma) of the density perturbed at noise level
    /// sigma. Errors on non-positive sigma or a dimension mismatch.
    fn score(&self, x: &[f64], sigma: f64) -> Result<Vec<f64>>;

    /// True score of a known density (as opposed to a perturbed estimate)?
    fn is_exact(&self) -> bool;

    /// Affine coefficients at this sigma, if the score is affine in x.
    fn affine(&self, sigma: f64) -> Option<AffineScore>;

    /// Fully normalized log p_sigma(x); only exact oracles support this.
    fn log_density(&self, x: &[f64], sigma: f64) -> Result<f64>;

    fn describe(&self) -> String;
}

fn check_args(dim: usize, x: &[f64], sigma: f64) -> Result<()> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    Ok(())
}

/// Expected denoised sample H(x, sigma) = x + sigma^2 s(x, sigma); the
/// posterior mean of the clean sample for exact oracles.
pub fn denoise(o: &dyn ScoreOracle, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let s = o.score(x, sigma)?;
    Ok(x.iter().zip(&s).map(|(xi, si)| xi + sigma * sigma * si).collect())
}

/// Exact score of N(mean, data_std^2 I) perturbed by N(0, sigma^2 I):
/// score(x, sigma) = (mean - x) / (data_std^2 + sigma^2). With data_std = 0
/// this is the perturbed point mass (mean - x)/sigma^2.
#[derive(Debug, Clone)]
pub struct GaussianOracle {
    mean: Vec<f64>,
    data_std: f64,
}

impl GaussianOracle {
    pub fn new(mean: Vec<f64>, data_std: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::domain("mean must have at least one component"));
        }
        if !(data_std >= 0.0 && data_std.is_finite()) {
            return Err(Error::domain(format!(
                "data_std must be non-negative, got {data_std}"
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::domain("mean must be finite"));
        }
        Ok(GaussianOracle { mean, data_std })
    }

    pub fn scalar(mean: f64, data_std: f64) -> Result<Self> {
        Self::new(vec![mean], data_std)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn data_std(&self) -> f64 {
        self.data_std
    }

    fn variance_at(&self, sigma: f64) -> f64 {
        self.data_std * self.data_std + sigma * sigma
    }
}

impl ScoreOracle for GaussianOracle {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn score(&self, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
        check_args(self.dim(), x, sigma)?;
        let v = self.variance_at(sigma);
        Ok(x.iter().zip(&self.mean).map(|(xi, mi)| (mi - xi) / v).collect())
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn affine(&self, sigma: f64) -> Option<AffineScore> {
        let v = self.variance_at(sigma);
        Some(AffineScore { a: -1.0 / v, b: self.mean.iter().map(|m| m / v).collect() })
    }

    fn log_density(&self, x: &[f64], sigma: f64) -> Result<f64> {
        check_args(self.dim(), x, sigma)?;
        let v = self.variance_at(sigma);
        let d = self.dim() as f64;
        let sq: f64 = x.iter().zip(&self.mean).map(|(xi, mi)| (xi - mi) * (xi - mi)).sum();
        Ok(-0.5 * d * (2.0 * std::f64::consts::PI * v).ln() - sq / (2.0 * v))
    }

    fn describe(&self) -> String {
        format!("gauss(mean={:?}, data_std={})", self.mean, self.data_std)
    }
}

/// Exact score of a weighted point cloud convolved with N(0, sigma^2 I):
/// the mixture Sum_k w_k N(x; x_k, sigma^2 I). Responsibilities are computed
/// through log-sum-exp so small sigma and wide point separations stay finite.
#[derive(Debug, Clone)]
pub struct PointCloudOracle {
    points: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
}

impl PointCloudOracle {
    /// Weights are normalized to sum to one; non-negative with a positive sum.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("point cloud must be non-empty"));
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch { left: points.len(), right: weights.len() });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::domain("points must have at least one coordinate"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::domain("points must be finite"));
            }
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::domain("weights must be non-negative and finite"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::domain("weights must have a positive sum"));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let log_weights = weights.iter().map(|w| w.ln()).collect(); // -inf for zero weights is fine under log-sum-exp
        Ok(PointCloudOracle { points, log_weights, weights })
    }

    pub fn equal_weights(points: Vec<Vec<f64>>) -> Result<Self> {
        let w = vec![1.0; points.len()];
        Self::new(points, w)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// log w_k - |x - x_k|^2 / (2 sigma^2) for every k, and their max.
    fn log_terms(&self, x: &[f64], sigma: f64) -> (Vec<f64>, f64) {
        let inv2 = 1.0 / (2.0 * sigma * sigma);
        let mut terms = Vec::with_capacity(self.points.len());
        let mut max = f64::NEG_INFINITY;
        for (p, lw) in self.points.iter().zip(&self.log_weights) {
            let sq: f64 = x.iter().zip(p).map(|(xi, pi)| (xi - pi) * (xi - pi)).sum();
            let t = lw - sq * inv2;
            if t > max {
                max = t;
            }
            terms.push(t);
        }
        (terms, max)
    }
}

impl ScoreOracle for PointCloudOracle {
    fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn score(&self, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
        check_args(self.dim(), x, sigma)?;
        let (terms, max) = self.log_terms(x, sigma);
        let mut total = 0.0;
        let mut acc = vec![0.0; self.dim()];
        for (p, t) in self.points.iter().zip(&terms) {
            let r = (t - max).exp();
            total += r;
            for (a, (pi, xi)) in acc.iter_mut().zip(p.iter().zip(x)) {
                *a += r * (pi - xi);
            }
        }
        let inv = 1.0 / (total * sigma * sigma);
        for a in acc.iter_mut() {
            *a *= inv;
        }
        Ok(acc)
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn affine(&self, _sigma: f64) -> Option<AffineScore> {
        None // mixture scores are nonlinear in x (except the single-point case, kept uniform)
    }

    fn log_density(&self, x: &[f64], sigma: f64) -> Result<f64> {
        check_args(self.dim(), x, sigma)?;
        let (terms, max) = self.log_terms(x, sigma);
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        let d = self.dim() as f64;
        Ok(max + sum.ln() - 0.5 * d * (2.0 * std::f64::consts::PI * sigma * sigma).ln())
    }

    fn describe(&self) -> String {
        format!("points({} atoms, dim {})", self.points.len(), self.dim())
    }
}

/// Wraps an oracle with a deterministic pseudo-random perturbation:
/// score(x, sigma) = inner(x, sigma) + (rho/sigma) u(seed, x, sigma), where u
/// is a unit-variance vector derived by a counter-based hash. Re-evaluating
/// at the same point reproduces the same error, like a trained model and
/// unlike fresh noise. rho = 0 is bit-identical to the inner oracle.
pub struct NoisyOracle {
    inner: Box<dyn ScoreOracle>,
    rho: f64,
    seed: u64,
}

impl NoisyOracle {
    pub fn new(inner: Box<dyn ScoreOracle>, rho: f64, seed: u64) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::domain(format!("rho must be non-negative, got {rho}")));
        }
        Ok(NoisyOracle { inner, rho, seed })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn inner(&self) -> &dyn ScoreOracle {
        self.inner.as_ref()
    }

    fn perturbation(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        let mut parts = Vec::with_capacity(x.len() + 3);
        parts.push(self.seed);
        parts.push(sigma.to_bits());
        parts.push(x.len() as u64);
        parts.extend(x.iter().map(|v| v.to_bits()));
        hashed_normal_vec(hash_seed(&parts), x.len())
    }
}

impl ScoreOracle for NoisyOracle {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn score(&self, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
        if self.rho == 0.0 {
            return self.inner.score(x, sigma); // bit-identical passthrough
        }
        let mut s = self.inner.score(x, sigma)?;
        let u = self.perturbation(x, sigma);
        let scale = self.rho / sigma;
        for (si, ui) in s.iter_mut().zip(&u) {
            *si += scale * ui;
        }
        Ok(s)
    }

    fn is_exact(&self) -> bool {
        self.rho == 0.0 && self.inner.is_exact()
    }

    fn affine(&self, sigma: f64) -> Option<AffineScore> {
        if self.rho == 0.0 {
            self.inner.affine(sigma)
        } else {
            None // the perturbation depends on x through the hash
        }
    }

    fn log_density(&self, x: &[f64], sigma: f64) -> Result<f64> {
        if self.rho == 0.0 {
            return self.inner.log_density(x, sigma);
        }
        Err(Error::NotExact("log_density".into()))
    }

    fn describe(&self) -> String {
        format!("noisy({}, rho={}, seed={})", self.inner.describe(), self.rho, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn gaussian_score_values() {
        let o = GaussianOracle::scalar(0.0, 1.0).unwrap();
        assert_close(o.score(&[2.0], 1.0).unwrap()[0], -1.0, 0.0);
        let pm = GaussianOracle::scalar(0.0, 0.0).unwrap();
        assert_close(pm.score(&[0.5], 0.5).unwrap()[0], -2.0, 0.0);
    }

    #[test]
    fn gaussian_denoise_is_posterior_mean() {
        let o = GaussianOracle::scalar(0.0, 1.0).unwrap();
        assert_close(denoise(&o, &[2.0], 1.0).unwrap()[0], 1.0, 1e-15);
        let pm = GaussianOracle::scalar(3.25, 0.0).unwrap();
        assert_close(denoise(&pm, &[-7.0], 0.3).unwrap()[0], 3.25, 1e-12);
        assert_close(denoise(&pm, &[40.0], 2.0).unwrap()[0], 3.25, 1e-12);
    }

    #[test]
    fn gaussian_log_density_value() {
        // N(0, 2) at 0: -0.5 ln(4 pi)
        let o = GaussianOracle::scalar(0.0, 1.0).unwrap();
        assert_close(
            o.log_density(&[0.0], 1.0).unwrap(),
            -1.2655121234846454,
            1e-15,
        );
    }

    #[test]
    fn point_cloud_symmetry_and_value() {
        let o = PointCloudOracle::equal_weights(vec![vec![-1.0], vec![1.0]]).unwrap();
        assert_close(o.score(&[0.0], 1.0).unwrap()[0], 0.0, 1e-15);
        // frozen reference value for x=0.5, sigma=0.5
        assert_close(
            o.score(&[0.5], 0.5).unwrap()[0],
            1.8561103203032676,
            1e-12,
        );
        assert_close(denoise(&o, &[0.0], 1.0).unwrap()[0], 0.0, 1e-15);
    }

    #[test]
    fn single_point_log_density() {
        let o = PointCloudOracle::equal_weights(vec![vec![0.0]]).unwrap();
        // log N(1; 0, 1)
        let expect = -0.5 - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_close(o.log_density(&[1.0], 1.0).unwrap(), expect, 1e-15);
    }

    #[test]
    fn point_cloud_survives_extreme_scales() {
        let o = PointCloudOracle::equal_weights(vec![vec![-1e3], vec![1e3]]).unwrap();
        for &sigma in &[1e-6, 1e-3, 1.0, 10.0] {
            for &x in &[-1e3, -500.0, 0.0, 999.0, 1e3] {
                let s = o.score(&[x], sigma).unwrap()[0];
                let ld = o.log_density(&[x], sigma).unwrap();
                assert!(s.is_finite(), "score at x={x}, sigma={sigma}");
                assert!(ld.is_finite() || ld == f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn point_mass_gaussian_matches_single_point_cloud() {
        let g = GaussianOracle::scalar(0.7, 0.0).unwrap();
        let p = PointCloudOracle::equal_weights(vec![vec![0.7]]).unwrap();
        for &x in &[-3.0, 0.0, 0.7, 5.5] {
            for &sigma in &[0.01, 0.3, 2.0] {
                let a = g.score(&[x], sigma).unwrap()[0];
                let b = p.score(&[x], sigma).unwrap()[0];
                let denom = a.abs().max(1.0);
                assert!(((a - b) / denom).abs() < 1e-12, "x={x} sigma={sigma}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_weight_points_are_inert() {
        let o = PointCloudOracle::new(vec![vec![-1.0], vec![1.0]], vec![1.0, 0.0]).unwrap();
        let g = GaussianOracle::scalar(-1.0, 0.0).unwrap();
        for &x in &[-0.5, 0.0, 2.0] {
            let a = o.score(&[x], 0.7).unwrap()[0];
            let b = g.score(&[x], 0.7).unwrap()[0];
            assert_close(a, b, 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn noisy_zero_rho_is_bit_identical() {
        let inner = GaussianOracle::scalar(0.3, 0.4).unwrap();
        let wrapped = NoisyOracle::new(Box::new(inner.clone()), 0.0, 1234).unwrap();
        for &x in &[-2.0, -0.0, 0.0, 1.75, 1e8] {
            for &sigma in &[1e-3, 1.0, 7.0] {
                let a = inner.score(&[x], sigma).unwrap()[0];
                let b = wrapped.score(&[x], sigma).unwrap()[0];
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn noisy_perturbation_is_reproducible_and_scaled() {
        let mk = || {
            NoisyOracle::new(
                Box::new(GaussianOracle::scalar(0.0, 1.0).unwrap()),
                0.25,
                42,
            )
            .unwrap()
        };
        let (a, b) = (mk(), mk());
        let x = [0.6];
        assert_eq!(
            a.score(&x, 0.5).unwrap()[0].to_bits(),
            b.score(&x, 0.5).unwrap()[0].to_bits()
        );
        // perturbation magnitude statistics: (rho/sigma) * unit variance
        let clean = GaussianOracle::scalar(0.0, 1.0).unwrap();
        let mut sumsq = 0.0;
        let n = 5000;
        for i in 0..n {
            let xv = [i as f64 * 0.01 - 25.0];
            let d = a.score(&xv, 0.5).unwrap()[0] - clean.score(&xv, 0.5).unwrap()[0];
            sumsq += d * d;
        }
        let rms = (sumsq / n as f64).sqrt();
        assert_close(rms, 0.5, 0.03); // rho/sigma = 0.25/0.5
    }

    #[test]
    fn noisy_oracle_flags() {
        let o = NoisyOracle::new(
            Box::new(GaussianOracle::scalar(0.0, 1.0).unwrap()),
            0.1,
            7,
        )
        .unwrap();
        assert!(!o.is_exact());
        assert!(o.affine(1.0).is_none());
        assert!(o.log_density(&[0.0], 1.0).is_err());
    }

    #[test]
    fn argument_validation() {
        let o = GaussianOracle::scalar(0.0, 1.0).unwrap();
        assert!(o.score(&[0.0], 0.0).is_err());
        assert!(o.score(&[0.0], -1.0).is_err());
        assert!(o.score(&[0.0, 0.0], 1.0).is_err());
        assert!(GaussianOracle::scalar(0.0, -1.0).is_err());
        assert!(PointCloudOracle::new(vec![vec![0.0]], vec![-1.0]).is_err());
        assert!(PointCloudOracle::new(vec![], vec![]).is_err());
        assert!(PointCloudOracle::new(vec![vec![0.0]], vec![0.0]).is_err());
    }
}
