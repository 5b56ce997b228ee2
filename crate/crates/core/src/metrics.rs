//! Transport-distance quality measures. The composite perceptual metric the
//! tuning methodology was originally reported with is not reproducible at
//! desk scale, so quality is scored as Q = -log10(W + 1e-12) on a Wasserstein
//! distance W between the sampler's output and the known target.

use crate::error::{Error, Result};
use crate::rng::NoiseStream;
use serde::Serialize;

/// Scalar quality of a sample set; higher q is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityScore {
    pub w_distance: f64,
    pub q: f64,
    pub n_samples: usize,
    pub n_diverged: usize,
}

impl QualityScore {
    pub fn from_w(w_distance: f64, n_samples: usize, n_diverged: usize) -> Self {
        QualityScore {
            w_distance,
            q: -(w_distance + 1e-12).log10(),
            n_samples,
            n_diverged,
        }
    }
}

fn check_samples_1d(name: &str, v: &[f64]) -> Result<()> {
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::domain(format!(
            "{name} contains a non-finite sample ({bad}); exclude diverged chains first"
        )));
    }
    Ok(())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Exact 1-D Wasserstein-1 between equally sized empirical distributions:
/// mean absolute difference of the sorted lists.
pub fn w1_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    check_samples_1d("first sample list", a)?;
    check_samples_1d("second sample list", b)?;
    let (sa, sb) = (sorted(a), sorted(b));
    Ok(sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / a.len() as f64)
}

/// Exact 1-D Wasserstein-2 between equally sized empirical distributions.
pub fn w2_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    check_samples_1d("first sample list", a)?;
    check_samples_1d("second sample list", b)?;
    let (sa, sb) = (sorted(a), sorted(b));
    Ok((sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64)
        .sqrt())
}

/// Wasserstein-2 between two 1-D Gaussians: sqrt((m1-m2)^2 + (s1-s2)^2).
pub fn w2_gaussian_closed(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    debug_assert!(s1 >= 0.0 && s2 >= 0.0);
    ((m1 - m2).powi(2) + (s1 - s2).powi(2)).sqrt()
}

/// Sliced Wasserstein-2: root-mean over random unit directions of the
/// squared 1-D W2 between the projected samples. Deterministic given seed.
pub fn sliced_w2(a: &[Vec<f64>], b: &[Vec<f64>], projections: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    if projections < 1 {
        return Err(Error::domain("projections must be >= 1".to_string()));
    }
    let dim = a[0].len();
    if dim == 0 {
        return Err(Error::domain("samples must have dimension >= 1".to_string()));
    }
    for (name, set) in [("first", a), ("second", b)] {
        for v in set {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            check_samples_1d(&format!("{name} sample list"), v)?;
        }
    }
    let mut stream = NoiseStream::new(seed);
    let mut acc = 0.0;
    let mut pa = vec![0.0; a.len()];
    let mut pb = vec![0.0; b.len()];
    for _ in 0..projections {
        let dir = loop {
            let d = stream.normal_vec(dim);
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break d.into_iter().map(|x| x / norm).collect::<Vec<_>>();
            }
        };
        for (p, v) in pa.iter_mut().zip(a) {
            *p = v.iter().zip(&dir).map(|(x, d)| x * d).sum();
        }
        for (p, v) in pb.iter_mut().zip(b) {
            *p = v.iter().zip(&dir).map(|(x, d)| x * d).sum();
        }
        let w2 = w2_empirical_1d(&pa, &pb)?;
        acc += w2 * w2;
    }
    Ok((acc / projections as f64).sqrt())
}

/// Scalar noise-level estimate from residual vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaEstimate {
    /// Root-mean-square of all residual components.
    pub sigma: f64,
    /// Large-sample standard error, sigma / sqrt(2 n d).
    pub standard_error: f64,
}

/// Aggregates residual vectors about a known center to a scalar noise std.
pub fn effective_sigma_estimate(residuals: &[Vec<f64>]) -> Result<SigmaEstimate> {
    if residuals.len() < 2 {
        return Err(Error::InsufficientSamples { got: residuals.len(), need: 2 });
    }
    let dim = residuals[0].len();
    if dim == 0 {
        return Err(Error::domain("residuals must have dimension >= 1".to_string()));
    }
    let mut sum_sq = 0.0;
    for r in residuals {
        if r.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        check_samples_1d("residual list", r)?;
        sum_sq += r.iter().map(|x| x * x).sum::<f64>();
    }
    let n = (residuals.len() * dim) as f64;
    let sigma = (sum_sq / n).sqrt();
    Ok(SigmaEstimate { sigma, standard_error: sigma / (2.0 * n).sqrt() })
}
