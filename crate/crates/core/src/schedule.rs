//! Geometric noise-level schedules.

use crate::error::{Error, Result};
use serde_json::json;

/// Geometrically spaced noise standard deviations sigma_1 > ... > sigma_N
/// with constant ratio gamma = sigma_{i+1}/sigma_i.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    levels: Vec<f64>,
    gamma: f64,
}

impl NoiseSchedule {
    /// Builds the schedule with `levels[0] = sigma_first`, `levels[n-1] =
    /// sigma_last` and gamma = (sigma_last/sigma_first)^(1/(n-1)). Levels are
    /// interpolated in log-space so large n does not accumulate
    /// multiplication drift; both endpoints are exact.
    pub fn geometric(sigma_first: f64, sigma_last: f64, n: usize) -> Result<Self> {
        if !sigma_first.is_finite() || !sigma_last.is_finite() {
            return Err(Error::domain("schedule endpoints must be finite"));
        }
        if sigma_last <= 0.0 {
            return Err(Error::domain(format!(
                "sigma_last must be positive, got {sigma_last}"
            )));
        }
        if sigma_first <= sigma_last {
            return Err(Error::domain(format!(
                "schedule must decrease: sigma_first = {sigma_first} <= sigma_last = {sigma_last}"
            )));
        }
        if n < 2 {
            return Err(Error::domain(format!(
                "schedule needs at least 2 levels, got {n}"
            )));
        }
        let (lf, ll) = (sigma_first.ln(), sigma_last.ln());
        let step = (ll - lf) / (n - 1) as f64;
        let mut levels: Vec<f64> = (0..n).map(|k| (lf + step * k as f64).exp()).collect();
        levels[0] = sigma_first;
        levels[n - 1] = sigma_last;
        Ok(NoiseSchedule { levels, gamma: step.exp() })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.levels.len()
    }

    pub fn sigma_first(&self) -> f64 {
        self.levels[0]
    }

    pub fn sigma_last(&self) -> f64 {
        *self.levels.last().unwrap()
    }

    /// Level lookup with a one-past-the-end extension: index is 1-based,
    /// `extended_sigma(n+1)` continues the progression as gamma * sigma_N
    /// (the recursions reference sigma_{i+1}, which at i = N falls off the
    /// schedule).
    pub fn extended_sigma(&self, i: usize) -> Result<f64> {
        let n = self.n();
        match i {
            0 => Err(Error::IndexOutOfBounds { index: 0, max: n + 1 }),
            i if i <= n => Ok(self.levels[i - 1]),
            i if i == n + 1 => Ok(self.gamma * self.levels[n - 1]),
            i => Err(Error::IndexOutOfBounds { index: i, max: n + 1 }),
        }
    }

    /// One level per line, full precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.levels {
            s.push_str(&format!("{l}\n"));
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "sigma_first": self.sigma_first(),
            "sigma_last": self.sigma_last(),
            "n": self.n(),
            "gamma": self.gamma,
            "levels": self.levels,
        })
    }
}
