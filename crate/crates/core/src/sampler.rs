//! The sampling recursions: annealed Langevin (ALS), consistent annealed
//! sampling (CAS) under both hyper-parameterizations, the predictor-corrector
//! scheme, and the two closed-form limit samplers (denoise-interpolation and
//! noise-plus-denoise).
//!
//! Every step of every scheme has the shape
//!
//! ```text
//! x' = x + score_coeff * s(x, sigma_eval) + noise_coeff * z
//! ```
//!
//! so a run is fully described by a [`StepPlan`]: the per-step coefficient
//! list built once by [`step_plan`]. The Monte-Carlo driver here and the
//! exact Gaussian propagation in [`crate::analytic`] consume the same plan,
//! which is what makes cross-checking them meaningful — the two cannot
//! silently drift apart.

use crate::error::{Error, Result};
use crate::oracle::ScoreOracle;
use crate::rng::NoiseStream;
use crate::schedule::NoiseSchedule;
use serde::{Deserialize, Serialize};

/// Largest f64 strictly below 1; `eta_from_eps_c` clamps here when
/// gamma^eps_c underflows to zero, keeping eta inside [1-gamma, 1).
const ETA_SUP: f64 = 1.0 - f64::EPSILON / 2.0;

/// Relative slack when testing (1-eta)^2 <= gamma^2, so that eta sitting
/// exactly on a boundary does not get rejected for a rounding ulp.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "als")]
    Als,
    #[serde(rename = "cas-b")]
    CasEpsB,
    #[serde(rename = "cas-c")]
    CasEpsC,
    #[serde(rename = "pc")]
    Pc,
    #[serde(rename = "denoise-interp")]
    DenoiseInterp,
    #[serde(rename = "noise-denoise")]
    NoiseDenoise,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Als => "als",
            Scheme::CasEpsB => "cas-b",
            Scheme::CasEpsC => "cas-c",
            Scheme::Pc => "pc",
            Scheme::DenoiseInterp => "denoise-interp",
            Scheme::NoiseDenoise => "noise-denoise",
        }
    }

    pub const ALL: [Scheme; 6] = [
        Scheme::Als,
        Scheme::CasEpsB,
        Scheme::CasEpsC,
        Scheme::Pc,
        Scheme::DenoiseInterp,
        Scheme::NoiseDenoise,
    ];
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "als" => Ok(Scheme::Als),
            "cas-b" => Ok(Scheme::CasEpsB),
            "cas-c" => Ok(Scheme::CasEpsC),
            "pc" => Ok(Scheme::Pc),
            "denoise-interp" => Ok(Scheme::DenoiseInterp),
            "noise-denoise" => Ok(Scheme::NoiseDenoise),
            other => Err(Error::parse(format!(
                "unknown scheme '{other}' (expected als, cas-b, cas-c, pc, denoise-interp or noise-denoise)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scheme tag plus hyper-parameters. `epsilon` is interpreted per scheme:
/// eps_a for ALS and the PC corrector, eps_b for CAS_EPS_B, eps_c for
/// CAS_EPS_C; the limit samplers ignore it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub scheme: Scheme,
    pub epsilon: f64,
    /// M corrector steps after each PC predictor step.
    pub corrector_steps: usize,
    /// Append the expected-denoised map H(x, sigma_N) as a final step.
    pub final_denoise: bool,
    /// Langevin iterations per noise level (ALS only).
    pub steps_per_level: usize,
    /// Use alpha = eps * sigma_i^2 / sigma_N^2 instead of eps * sigma_i / sigma_N.
    pub als_alpha_squared: bool,
}

impl SamplerConfig {
    pub fn new(scheme: Scheme, epsilon: f64) -> Self {
        SamplerConfig {
            scheme,
            epsilon,
            corrector_steps: 0,
            final_denoise: false,
            steps_per_level: 1,
            als_alpha_squared: false,
        }
    }

    pub fn with_final_denoise(mut self, on: bool) -> Self {
        self.final_denoise = on;
        self
    }

    pub fn with_corrector_steps(mut self, m: usize) -> Self {
        self.corrector_steps = m;
        self
    }

    pub fn with_steps_per_level(mut self, k: usize) -> Self {
        self.steps_per_level = k;
        self
    }

    pub fn with_als_alpha_squared(mut self, on: bool) -> Self {
        self.als_alpha_squared = on;
        self
    }
}

/// eta = eps_b / sigma_N^2. No clamping: an out-of-band eta must surface as
/// an error downstream, reproducing the observation that the eps_b
/// parameterization breaks sampling for small N.
pub fn eta_from_eps_b(eps_b: f64, sigma_last: f64) -> Result<f64> {
    if !(eps_b > 0.0) || !eps_b.is_finite() {
        return Err(Error::domain(format!("eps_b must be positive, got {eps_b}")));
    }
    if !(sigma_last > 0.0) {
        return Err(Error::domain(format!(
            "sigma_last must be positive, got {sigma_last}"
        )));
    }
    Ok(eps_b / (sigma_last * sigma_last))
}

/// eta = 1 - gamma^eps_c, eps_c >= 1: always lands in [1-gamma, 1) and is
/// monotone increasing in eps_c.
pub fn eta_from_eps_c(eps_c: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(eps_c >= 1.0) || !eps_c.is_finite() {
        return Err(Error::domain(format!("eps_c must be >= 1, got {eps_c}")));
    }
    let eta = 1.0 - gamma.powf(eps_c);
    // gamma^eps_c underflows for very large eps_c; keep eta strictly below 1
    Ok(if eta >= 1.0 { ETA_SUP } else { eta })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaResult {
    pub beta: f64,
    /// eta > 1 amplifies the injected noise; allowed, but surfaced.
    pub amplification: bool,
}

/// beta = sqrt(1 - ((1-eta)/gamma)^2), the unique noise scale that keeps the
/// chain variance on the schedule. Errors when eta lies outside
/// [1-gamma, 1+gamma], where beta would be imaginary.
pub fn beta_of_eta(eta: f64, gamma: f64) -> Result<BetaResult> {
    check_gamma(gamma)?;
    if !eta.is_finite() {
        return Err(Error::domain(format!("eta must be finite, got {eta}")));
    }
    let r2 = ((1.0 - eta) / gamma).powi(2);
    if r2 > 1.0 + BOUNDARY_SLACK {
        return Err(Error::EtaOutOfBounds {
            eta,
            gamma,
            lo: 1.0 - gamma,
            hi: 1.0 + gamma,
        });
    }
    Ok(BetaResult {
        beta: (1.0 - r2).max(0.0).sqrt(),
        amplification: eta > 1.0,
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

/// ALS step size at level sigma_i.
pub fn als_alpha(eps_a: f64, sigma_i: f64, sigma_last: f64, squared: bool) -> f64 {
    if squared {
        eps_a * (sigma_i * sigma_i) / (sigma_last * sigma_last)
    } else {
        eps_a * sigma_i / sigma_last
    }
}

/// x + score_coeff * s(x, sigma_eval) + noise_coeff * z — the shared shape
/// of every step. All step functions and the chain driver route
/// through here, so algebraically identical schemes also agree bit-for-bit.
pub fn affine_step(
    o: &dyn ScoreOracle,
    x: &[f64],
    sigma_eval: f64,
    score_coeff: f64,
    noise_coeff: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    if z.len() != x.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: z.len() });
    }
    let s = o.score(x, sigma_eval)?;
    Ok(x.iter()
        .zip(s.iter().zip(z))
        .map(|(xi, (si, zi))| xi + score_coeff * si + noise_coeff * zi)
        .collect())
}

/// One annealed Langevin update: x + alpha s + sqrt(2 alpha) z with
/// alpha = eps_a sigma_i / sigma_N.
pub fn als_step(
    o: &dyn ScoreOracle,
    x: &[f64],
    sigma_i: f64,
    sigma_last: f64,
    eps_a: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    if !(sigma_i >= sigma_last && sigma_last > 0.0) {
        return Err(Error::domain(format!(
            "need sigma_i >= sigma_last > 0, got sigma_i = {sigma_i}, sigma_last = {sigma_last}"
        )));
    }
    if !(eps_a > 0.0) {
        return Err(Error::domain(format!("eps_a must be positive, got {eps_a}")));
    }
    let alpha = als_alpha(eps_a, sigma_i, sigma_last, false);
    affine_step(o, x, sigma_i, alpha, (2.0 * alpha).sqrt(), z)
}

/// One consistent annealed sampling update: x + eta sigma_i^2 s + beta sigma_{i+1} z.
pub fn cas_step(
    o: &dyn ScoreOracle,
    x: &[f64],
    sigma_i: f64,
    sigma_next: f64,
    eta: f64,
    beta: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    if !(sigma_i > sigma_next && sigma_next > 0.0) {
        return Err(Error::domain(format!(
            "need sigma_i > sigma_next > 0, got sigma_i = {sigma_i}, sigma_next = {sigma_next}"
        )));
    }
    affine_step(o, x, sigma_i, eta * sigma_i * sigma_i, beta * sigma_next, z)
}

/// One predictor step of the predictor-corrector scheme:
/// x + (sigma_i^2 - sigma_next^2) s + sqrt(sigma_i^2 - sigma_next^2) z.
pub fn pc_predictor_step(
    o: &dyn ScoreOracle,
    x: &[f64],
    sigma_i: f64,
    sigma_next: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    if !(sigma_i > sigma_next && sigma_next >= 0.0) && sigma_i != sigma_next {
        return Err(Error::domain(format!(
            "need sigma_i >= sigma_next >= 0, got sigma_i = {sigma_i}, sigma_next = {sigma_next}"
        )));
    }
    let d = sigma_i * sigma_i - sigma_next * sigma_next;
    affine_step(o, x, sigma_i, d, d.sqrt(), z)
}

/// The eps_c = 1 limit of CAS: gamma x + (1-gamma) H(x, sigma_i), taken with
/// zero injected noise. Computed through the shared affine form
/// x + (1-gamma) sigma_i^2 s so it matches cas_step(eta = 1-gamma, beta = 0)
/// bit-for-bit.
pub fn denoise_interp_step(
    o: &dyn ScoreOracle,
    x: &[f64],
    sigma_i: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let zeros = vec![0.0; x.len()];
    affine_step(o, x, sigma_i, (1.0 - gamma) * sigma_i * sigma_i, 0.0, &zeros)
}

/// The eps_c -> infinity limit of CAS: H(x, sigma_i) + sigma_next z,
/// equal to cas_step(eta = 1, beta = 1) bit-for-bit.
pub fn noise_denoise_step(
    o: &dyn ScoreOracle,
    x: &[f64],
    sigma_i: f64,
    sigma_next: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    if !(sigma_i > sigma_next && sigma_next > 0.0) {
        return Err(Error::domain(format!(
            "need sigma_i > sigma_next > 0, got sigma_i = {sigma_i}, sigma_next = {sigma_next}"
        )));
    }
    affine_step(o, x, sigma_i, 1.0 * sigma_i * sigma_i, 1.0 * sigma_next, z)
}

/// Final expected-denoised map H(x, sigma_N); consumes no RNG draw.
pub fn final_denoise_step(o: &dyn ScoreOracle, x: &[f64], sigma_last: f64) -> Result<Vec<f64>> {
    let zeros = vec![0.0; x.len()];
    affine_step(o, x, sigma_last, sigma_last * sigma_last, 0.0, &zeros)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Als { sub: usize },
    Cas,
    PcPredictor,
    PcCorrector { sub: usize },
    DenoiseInterp,
    NoiseDenoise,
    FinalDenoise,
}

impl StepKind {
    pub fn label(&self) -> &'static str {
        match self {
            StepKind::Als { .. } => "als",
            StepKind::Cas => "cas",
            StepKind::PcPredictor => "pc-predictor",
            StepKind::PcCorrector { .. } => "pc-corrector",
            StepKind::DenoiseInterp => "denoise-interp",
            StepKind::NoiseDenoise => "noise-denoise",
            StepKind::FinalDenoise => "final-denoise",
        }
    }
}

/// One step of a run, reduced to its affine coefficients. `eta` holds eta
/// for the CAS family and alpha for ALS-style steps; both it and `beta` are
/// NaN where the notion does not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCoeffs {
    /// 1-based schedule level this step belongs to.
    pub level: usize,
    pub kind: StepKind,
    pub sigma_eval: f64,
    pub sigma_next: f64,
    pub score_coeff: f64,
    pub noise_coeff: f64,
    pub consumes_draw: bool,
    pub eta: f64,
    pub beta: f64,
}

/// Complete coefficient schedule for a configured run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub coeffs: Vec<StepCoeffs>,
    /// Config-level eta/beta for the CAS family (NaN for other schemes).
    pub eta: f64,
    pub beta: f64,
    pub amplification_warning: bool,
}

/// Expands (schedule, config) into the full per-step coefficient list.
/// All domain validation happens here, before any sampling starts.
pub fn step_plan(s: &NoiseSchedule, cfg: &SamplerConfig) -> Result<StepPlan> {
    let n = s.n();
    let gamma = s.gamma();
    let sigma_last = s.sigma_last();
    let mut coeffs = Vec::new();
    let mut plan_eta = f64::NAN;
    let mut plan_beta = f64::NAN;
    let mut warn = false;

    match cfg.scheme {
        Scheme::Als => {
            if !(cfg.epsilon > 0.0) || !cfg.epsilon.is_finite() {
                return Err(Error::domain(format!(
                    "eps_a must be positive, got {}",
                    cfg.epsilon
                )));
            }
            if cfg.steps_per_level < 1 {
                return Err(Error::domain("steps_per_level must be >= 1".to_string()));
            }
            for i in 1..=n {
                let sigma_i = s.levels()[i - 1];
                let alpha = als_alpha(cfg.epsilon, sigma_i, sigma_last, cfg.als_alpha_squared);
                for sub in 0..cfg.steps_per_level {
                    coeffs.push(StepCoeffs {
                        level: i,
                        kind: StepKind::Als { sub },
                        sigma_eval: sigma_i,
                        sigma_next: s.extended_sigma(i + 1)?,
                        score_coeff: alpha,
                        noise_coeff: (2.0 * alpha).sqrt(),
                        consumes_draw: true,
                        eta: alpha,
                        beta: f64::NAN,
                    });
                }
            }
        }
        Scheme::CasEpsB | Scheme::CasEpsC => {
            let eta = match cfg.scheme {
                Scheme::CasEpsB => eta_from_eps_b(cfg.epsilon, sigma_last)?,
                _ => eta_from_eps_c(cfg.epsilon, gamma)?,
            };
            let BetaResult { beta, amplification } = beta_of_eta(eta, gamma)?;
            plan_eta = eta;
            plan_beta = beta;
            warn = amplification;
            for i in 1..=n {
                let sigma_i = s.levels()[i - 1];
                let sigma_next = s.extended_sigma(i + 1)?;
                coeffs.push(StepCoeffs {
                    level: i,
                    kind: StepKind::Cas,
                    sigma_eval: sigma_i,
                    sigma_next,
                    score_coeff: eta * sigma_i * sigma_i,
                    noise_coeff: beta * sigma_next,
                    consumes_draw: true,
                    eta,
                    beta,
                });
            }
        }
        Scheme::DenoiseInterp => {
            plan_eta = 1.0 - gamma;
            plan_beta = 0.0;
            for i in 1..=n {
                let sigma_i = s.levels()[i - 1];
                coeffs.push(StepCoeffs {
                    level: i,
                    kind: StepKind::DenoiseInterp,
                    sigma_eval: sigma_i,
                    sigma_next: s.extended_sigma(i + 1)?,
                    score_coeff: (1.0 - gamma) * sigma_i * sigma_i,
                    noise_coeff: 0.0,
                    // consumed and discarded: keeps the draw sequence aligned
                    // with the CAS family so traces compare draw-for-draw
                    consumes_draw: true,
                    eta: 1.0 - gamma,
                    beta: 0.0,
                });
            }
        }
        Scheme::NoiseDenoise => {
            plan_eta = 1.0;
            plan_beta = 1.0;
            for i in 1..=n {
                let sigma_i = s.levels()[i - 1];
                let sigma_next = s.extended_sigma(i + 1)?;
                coeffs.push(StepCoeffs {
                    level: i,
                    kind: StepKind::NoiseDenoise,
                    sigma_eval: sigma_i,
                    sigma_next,
                    score_coeff: 1.0 * sigma_i * sigma_i,
                    noise_coeff: 1.0 * sigma_next,
                    consumes_draw: true,
                    eta: 1.0,
                    beta: 1.0,
                });
            }
        }
        Scheme::Pc => {
            if cfg.corrector_steps > 0 && (!(cfg.epsilon > 0.0) || !cfg.epsilon.is_finite()) {
                return Err(Error::domain(format!(
                    "eps_a must be positive for PC corrector steps, got {}",
                    cfg.epsilon
                )));
            }
            for i in 1..=n {
                let sigma_i = s.levels()[i - 1];
                let sigma_next = s.extended_sigma(i + 1)?;
                let d = sigma_i * sigma_i - sigma_next * sigma_next;
                coeffs.push(StepCoeffs {
                    level: i,
                    kind: StepKind::PcPredictor,
                    sigma_eval: sigma_i,
                    sigma_next,
                    score_coeff: d,
                    noise_coeff: d.sqrt(),
                    consumes_draw: true,
                    eta: f64::NAN,
                    beta: f64::NAN,
                });
                // corrector anneals at the level the predictor just reached
                let alpha =
                    als_alpha(cfg.epsilon, sigma_next, sigma_last, cfg.als_alpha_squared);
                for sub in 0..cfg.corrector_steps {
                    coeffs.push(StepCoeffs {
                        level: i,
                        kind: StepKind::PcCorrector { sub },
                        sigma_eval: sigma_next,
                        sigma_next,
                        score_coeff: alpha,
                        noise_coeff: (2.0 * alpha).sqrt(),
                        consumes_draw: true,
                        eta: alpha,
                        beta: f64::NAN,
                    });
                }
            }
        }
    }

    if cfg.final_denoise {
        coeffs.push(StepCoeffs {
            level: n,
            kind: StepKind::FinalDenoise,
            sigma_eval: sigma_last,
            sigma_next: sigma_last,
            score_coeff: sigma_last * sigma_last,
            noise_coeff: 0.0,
            consumes_draw: false,
            eta: f64::NAN,
            beta: f64::NAN,
        });
    }

    Ok(StepPlan { coeffs, eta: plan_eta, beta: plan_beta, amplification_warning: warn })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub level: usize,
    pub kind: StepKind,
    pub sigma: f64,
    pub sigma_next: f64,
    pub eta: f64,
    pub beta: f64,
    pub state_before: Vec<f64>,
    pub state_after: Vec<f64>,
    pub consumed_draw: bool,
}

#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub config: SamplerConfig,
    pub schedule: NoiseSchedule,
    pub seed: u64,
    pub chain: u64,
    pub steps: Vec<StepRecord>,
    pub final_state: Vec<f64>,
    pub diverged: bool,
    pub amplification_warning: bool,
}

/// Drives one chain through the plan, invoking `observer` after every step
/// with (coeffs, state_before, state_after). Returns the final state and the
/// divergence flag; a chain halts at the first non-finite component.
pub fn simulate<F>(
    o: &dyn ScoreOracle,
    s: &NoiseSchedule,
    cfg: &SamplerConfig,
    seed: u64,
    chain: u64,
    dim: usize,
    x0: Option<&[f64]>,
    mut observer: F,
) -> Result<(Vec<f64>, bool)>
where
    F: FnMut(&StepCoeffs, &[f64], &[f64]),
{
    let plan = step_plan(s, cfg)?; // fail fast, before any draws
    if dim == 0 {
        return Err(Error::domain("dimension must be >= 1".to_string()));
    }
    if o.dim() != dim {
        return Err(Error::DimensionMismatch { expected: o.dim(), got: dim });
    }
    let mut stream = NoiseStream::for_chain(seed, chain);
    let mut x = match x0 {
        Some(v) => {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            v.to_vec()
        }
        None => {
            // x_0 ~ N(0, sigma_1^2 I)
            let sigma_first = s.sigma_first();
            let mut z = stream.normal_vec(dim);
            for v in z.iter_mut() {
                *v *= sigma_first;
            }
            z
        }
    };
    let mut zeros_buf = vec![0.0; dim];
    let mut diverged = false;
    for c in &plan.coeffs {
        let z: &[f64] = if c.consumes_draw {
            zeros_buf = stream.normal_vec(dim);
            &zeros_buf
        } else {
            zeros_buf.iter_mut().for_each(|v| *v = 0.0);
            &zeros_buf
        };
        let sc = o.score(&x, c.sigma_eval)?;
        let next: Vec<f64> = x
            .iter()
            .zip(sc.iter().zip(z))
            .map(|(xi, (si, zi))| xi + c.score_coeff * si + c.noise_coeff * zi)
            .collect();
        observer(c, &x, &next);
        let bad = next.iter().any(|v| !v.is_finite());
        x = next;
        if bad {
            diverged = true;
            break;
        }
    }
    Ok((x, diverged))
}

/// Full-trace variant of [`simulate`].
pub fn run_chain(
    o: &dyn ScoreOracle,
    s: &NoiseSchedule,
    cfg: &SamplerConfig,
    seed: u64,
    chain: u64,
    dim: usize,
    x0: Option<&[f64]>,
) -> Result<ChainTrace> {
    let plan = step_plan(s, cfg)?;
    let mut steps = Vec::with_capacity(plan.coeffs.len());
    let (final_state, diverged) = simulate(o, s, cfg, seed, chain, dim, x0, |c, before, after| {
        steps.push(StepRecord {
            level: c.level,
            kind: c.kind,
            sigma: c.sigma_eval,
            sigma_next: c.sigma_next,
            eta: c.eta,
            beta: c.beta,
            state_before: before.to_vec(),
            state_after: after.to_vec(),
            consumed_draw: c.consumes_draw,
        });
    })?;
    Ok(ChainTrace {
        config: cfg.clone(),
        schedule: s.clone(),
        seed,
        chain,
        steps,
        final_state,
        diverged,
        amplification_warning: plan.amplification_warning,
    })
}

/// Final state only; the cheap path for Monte-Carlo ensembles.
pub fn run_final(
    o: &dyn ScoreOracle,
    s: &NoiseSchedule,
    cfg: &SamplerConfig,
    seed: u64,
    chain: u64,
    dim: usize,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, bool)> {
    simulate(o, s, cfg, seed, chain, dim, x0, |_, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{denoise, GaussianOracle};

    fn pm(mean: f64) -> GaussianOracle {
        GaussianOracle::scalar(mean, 0.0).unwrap()
    }

    #[test]
    fn eta_from_eps_b_values() {
        assert_eq!(eta_from_eps_b(1e-4, 0.01).unwrap(), 1.0);
        assert_eq!(eta_from_eps_b(5e-5, 0.01).unwrap(), 0.5);
        assert_eq!(eta_from_eps_b(1e-2, 0.01).unwrap(), 100.0);
        assert!(eta_from_eps_b(0.0, 0.01).is_err());
        assert!(eta_from_eps_b(1.0, 0.0).is_err());
    }

    #[test]
    fn eta_from_eps_c_values() {
        assert!((eta_from_eps_c(1.0, 0.9).unwrap() - 0.1).abs() < 1e-15);
        assert!((eta_from_eps_c(2.0, 0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!(eta_from_eps_c(0.99, 0.5).is_err());
        // approaches (but never reaches) 1
        for &e in &[10.0, 100.0, 1e4, 1e6 - 1.0] {
            let eta = eta_from_eps_c(e, 0.5).unwrap();
            assert!(eta < 1.0 && eta >= 0.5, "eps_c={e} eta={eta}");
        }
    }

    #[test]
    fn beta_of_eta_values() {
        let g = 0.5;
        assert_eq!(beta_of_eta(1.0 - g, g).unwrap().beta, 0.0);
        assert_eq!(beta_of_eta(1.0, g).unwrap().beta, 1.0);
        let b = beta_of_eta(1.0 - g * g, g).unwrap().beta;
        assert!((b - 0.8660254037844386).abs() < 1e-15);
        assert!(matches!(
            beta_of_eta(1.9, 0.5),
            Err(Error::EtaOutOfBounds { .. })
        ));
        assert!(beta_of_eta(-0.2, 0.5).is_err());
    }

    #[test]
    fn beta_amplification_flag() {
        assert!(!beta_of_eta(1.0, 0.5).unwrap().amplification);
        assert!(beta_of_eta(1.2, 0.5).unwrap().amplification);
        assert!(!beta_of_eta(0.8, 0.5).unwrap().amplification);
    }

    #[test]
    fn beta_boundary_is_ulp_tolerant() {
        // eta computed as 1-gamma in floating point must not be rejected;
        // for gamma >= 0.5 both subtractions are exact and beta is exactly 0,
        // below that the boundary beta is sqrt(rounding) ~ 1e-8
        for &g in &[0.1, 0.5179474679231212, 0.9643883791544459, 0.999] {
            let r = beta_of_eta(1.0 - g, g).unwrap();
            if g >= 0.5 {
                assert_eq!(r.beta, 0.0);
            } else {
                assert!(r.beta <= 1e-7);
            }
            let r = beta_of_eta(1.0 + g, g).unwrap();
            assert!(r.beta <= 1e-6);
        }
    }

    #[test]
    fn als_step_frozen_value() {
        // sigma_i = sigma_N = 0.01, eps 0.01 -> alpha 0.01; x=1, z=1
        let y = als_step(&pm(0.0), &[1.0], 0.01, 0.01, 0.01, &[1.0]).unwrap();
        assert!((y[0] - -98.85857864376269).abs() < 1e-12);
        // alpha = 1 case: lands exactly on the mean
        let y = als_step(&pm(0.0), &[1.0], 1.0, 0.01, 0.01, &[0.0]).unwrap();
        assert_eq!(y[0], 0.0);
    }

    #[test]
    fn als_tiny_eps_barely_moves() {
        let o = GaussianOracle::scalar(0.0, 1.0).unwrap();
        let y = als_step(&o, &[2.0], 1.0, 1.0, 1e-12, &[0.0]).unwrap();
        assert!((y[0] - 2.0).abs() <= 1e-11);
    }

    #[test]
    fn cas_step_frozen_values() {
        let y = cas_step(&pm(0.0), &[1.0], 1.0, 0.5, 0.75, 0.75f64.sqrt(), &[0.0]).unwrap();
        assert!((y[0] - 0.25).abs() < 1e-15);
        let y = cas_step(&pm(0.0), &[1.0], 1.0, 0.5, 0.75, 0.75f64.sqrt(), &[1.0]).unwrap();
        assert!((y[0] - 0.6830127018922193).abs() < 1e-15);
    }

    #[test]
    fn cas_eta_one_is_denoise() {
        let o = GaussianOracle::scalar(0.4, 0.8).unwrap();
        for &x in &[-1.0, 0.0, 2.5] {
            let y = cas_step(&o, &[x], 1.0, 0.5, 1.0, 1.0, &[0.0]).unwrap();
            let h = denoise(&o, &[x], 1.0).unwrap();
            assert!((y[0] - h[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn pc_predictor_frozen_value() {
        let y = pc_predictor_step(&pm(0.0), &[1.0], 1.0, 0.5, &[1.0]).unwrap();
        assert!((y[0] - 1.1160254037844386).abs() < 1e-15);
        // sigma_next = sigma_i leaves x untouched
        let y = pc_predictor_step(&pm(0.0), &[3.0], 0.5, 0.5, &[1.0]).unwrap();
        assert_eq!(y[0], 3.0);
    }

    #[test]
    fn denoise_interp_point_mass() {
        let o = pm(2.0);
        let y = denoise_interp_step(&o, &[0.0], 1.0, 0.5).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12); // 0.5 x + 0.5 mu
        // fixed point: x already denoised
        let y = denoise_interp_step(&o, &[2.0], 1.0, 0.5).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noise_denoise_point_mass() {
        let y = noise_denoise_step(&pm(0.0), &[5.0], 1.0, 0.1, &[2.0]).unwrap();
        assert!((y[0] - 0.2).abs() < 1e-12);
        let y = noise_denoise_step(&pm(0.0), &[5.0], 1.0, 0.1, &[0.0]).unwrap();
        assert!(y[0].abs() < 1e-12);
    }

    #[test]
    fn final_denoise_point_mass() {
        let y = final_denoise_step(&pm(7.0), &[123.0], 0.3).unwrap();
        assert!((y[0] - 7.0).abs() < 1e-9);
        let o = GaussianOracle::scalar(0.0, 1.0).unwrap();
        let y = final_denoise_step(&o, &[2.0], 1.0).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn step_counts_match_config() {
        let s = NoiseSchedule::geometric(1.0, 0.01, 5).unwrap();
        let o = pm(0.0);
        let count = |cfg: &SamplerConfig| {
            run_chain(&o, &s, cfg, 1, 0, 1, None).unwrap().steps.len()
        };
        assert_eq!(count(&SamplerConfig::new(Scheme::CasEpsC, 2.0)), 5);
        assert_eq!(
            count(&SamplerConfig::new(Scheme::CasEpsC, 2.0).with_final_denoise(true)),
            6
        );
        assert_eq!(
            count(&SamplerConfig::new(Scheme::Als, 0.01).with_steps_per_level(3)),
            15
        );
        assert_eq!(
            count(&SamplerConfig::new(Scheme::Pc, 0.01).with_corrector_steps(2)),
            15
        );
        assert_eq!(count(&SamplerConfig::new(Scheme::DenoiseInterp, 1.0)), 5);
        assert_eq!(count(&SamplerConfig::new(Scheme::NoiseDenoise, 1.0)), 5);
    }

    #[test]
    fn fail_fast_on_bad_eta() {
        let s = NoiseSchedule::geometric(1.0, 0.01, 4).unwrap();
        let cfg = SamplerConfig::new(Scheme::CasEpsB, 1e-2); // eta = 100
        let err = run_chain(&pm(0.0), &s, &cfg, 1, 0, 1, None).unwrap_err();
        assert!(matches!(err, Error::EtaOutOfBounds { .. }));
    }

    #[test]
    fn amplification_warning_reaches_trace() {
        let s = NoiseSchedule::geometric(1.0, 0.5, 4).unwrap();
        // gamma ~ 0.794; eta = 1.2 sits in (1, 1+gamma]
        let eps_b = 1.2 * 0.25;
        let cfg = SamplerConfig::new(Scheme::CasEpsB, eps_b);
        let t = run_chain(&pm(0.0), &s, &cfg, 1, 0, 1, None).unwrap();
        assert!(t.amplification_warning);
        let cfg = SamplerConfig::new(Scheme::CasEpsB, 0.9 * 0.25);
        let t = run_chain(&pm(0.0), &s, &cfg, 1, 0, 1, None).unwrap();
        assert!(!t.amplification_warning);
    }

    #[test]
    fn traces_are_deterministic() {
        let s = NoiseSchedule::geometric(1.0, 0.01, 8).unwrap();
        let o = GaussianOracle::scalar(0.25, 0.5).unwrap();
        let cfg = SamplerConfig::new(Scheme::CasEpsC, 3.0).with_final_denoise(true);
        let a = run_chain(&o, &s, &cfg, 99, 4, 1, None).unwrap();
        let b = run_chain(&o, &s, &cfg, 99, 4, 1, None).unwrap();
        assert_eq!(a.final_state[0].to_bits(), b.final_state[0].to_bits());
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            assert_eq!(sa.state_after[0].to_bits(), sb.state_after[0].to_bits());
        }
    }

    #[test]
    fn cas_b_eta_one_matches_noise_denoise_bitwise() {
        let s = NoiseSchedule::geometric(1.0, 0.01, 6).unwrap();
        let o = GaussianOracle::scalar(0.3, 0.7).unwrap();
        let sn = s.sigma_last();
        let cas = SamplerConfig::new(Scheme::CasEpsB, sn * sn); // eta = 1 exactly
        let nd = SamplerConfig::new(Scheme::NoiseDenoise, 1.0);
        let a = run_chain(&o, &s, &cas, 7, 0, 1, None).unwrap();
        let b = run_chain(&o, &s, &nd, 7, 0, 1, None).unwrap();
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            assert_eq!(sa.state_after[0].to_bits(), sb.state_after[0].to_bits());
        }
    }

    #[test]
    fn cas_c_one_matches_denoise_interp() {
        // gamma >= 0.5 keeps eta = 1-gamma and beta = 0 exact in floating point
        let s = NoiseSchedule::geometric(1.0, 0.05, 6).unwrap();
        let o = GaussianOracle::scalar(-0.4, 0.2).unwrap();
        let a = run_chain(&o, &s, &SamplerConfig::new(Scheme::CasEpsC, 1.0), 3, 0, 1, None)
            .unwrap();
        let b =
            run_chain(&o, &s, &SamplerConfig::new(Scheme::DenoiseInterp, 1.0), 3, 0, 1, None)
                .unwrap();
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            let (x, y) = (sa.state_after[0], sb.state_after[0]);
            assert!(((x - y) / x.abs().max(1e-300)).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn divergence_is_flagged_not_fatal() {
        let s = NoiseSchedule::geometric(1.0, 0.01, 16).unwrap();
        // grotesquely large Langevin steps blow up the point-mass chain
        let cfg = SamplerConfig::new(Scheme::Als, 1e18);
        let t = run_chain(&pm(0.0), &s, &cfg, 5, 0, 1, None).unwrap();
        assert!(t.diverged);
        assert!(t.steps.len() <= 16);
        assert!(t.final_state[0].is_infinite() || t.final_state[0].is_nan());
    }

    #[test]
    fn x0_override_is_respected() {
        let s = NoiseSchedule::geometric(1.0, 0.1, 3).unwrap();
        let cfg = SamplerConfig::new(Scheme::DenoiseInterp, 1.0);
        let t = run_chain(&pm(0.0), &s, &cfg, 1, 0, 1, Some(&[4.0])).unwrap();
        assert_eq!(t.steps[0].state_before[0], 4.0);
        assert!(run_chain(&pm(0.0), &s, &cfg, 1, 0, 1, Some(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn scheme_parsing_round_trip() {
        for sch in Scheme::ALL {
            let parsed: Scheme = sch.as_str().parse().unwrap();
            assert_eq!(parsed, sch);
            // serde must use the same spelling as Display/FromStr
            let json = serde_json::to_string(&sch).unwrap();
            assert_eq!(json, format!("\"{}\"", sch.as_str()));
            assert_eq!(serde_json::from_str::<Scheme>(&json).unwrap(), sch);
        }
        assert!("casb".parse::<Scheme>().is_err());
    }
}
