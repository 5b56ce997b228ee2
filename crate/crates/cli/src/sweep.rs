//! Hyper-parameter sweep engine: an (N, epsilon) grid of independent cells,
//! each sampling a chain ensemble and scoring it against the oracle's target
//! distribution. Cells are embarrassingly parallel; per-cell seeds derive
//! from (base seed, grid indices) so results do not depend on scheduling.

use crate::oraclespec::OracleSpec;
use rayon::prelude::*;
use scorelab::metrics::{sliced_w2, w1_empirical_1d, QualityScore};
use scorelab::oracle::ScoreOracle;
use scorelab::rng::hash_seed;
use scorelab::sampler::{
    eta_from_eps_b, eta_from_eps_c, run_final, step_plan, SamplerConfig, Scheme,
};
use scorelab::schedule::NoiseSchedule;
use scorelab::{Error, Result};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricChoice {
    W1,
    SlicedW2,
}

impl MetricChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricChoice::W1 => "w1",
            MetricChoice::SlicedW2 => "sliced",
        }
    }
}

impl std::str::FromStr for MetricChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w1" => Ok(MetricChoice::W1),
            "sliced" => Ok(MetricChoice::SlicedW2),
            other => Err(Error::parse(format!(
                "unknown metric '{other}' (expected w1 or sliced)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub oracle: OracleSpec,
    pub sigma_first: f64,
    pub sigma_last: f64,
    pub n_values: Vec<usize>,
    pub scheme: Scheme,
    pub epsilons: Vec<f64>,
    pub chains: usize,
    pub seed: u64,
    pub metric: MetricChoice,
    pub final_denoise: bool,
    pub steps_per_level: usize,
    pub corrector_steps: usize,
    pub als_alpha_squared: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::parse("epsilon grid must not be empty".to_string()));
        }
        if self.n_values.is_empty() {
            return Err(Error::parse("N grid must not be empty".to_string()));
        }
        if self.chains < 1 {
            return Err(Error::parse("chains must be >= 1".to_string()));
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < 2) {
            return Err(Error::parse(format!("every N must be >= 2, got {n}")));
        }
        if self.metric == MetricChoice::W1 && self.oracle.dim() != 1 {
            return Err(Error::parse(
                "the w1 metric needs a 1-D oracle; use metric=sliced".to_string(),
            ));
        }
        if !(self.sigma_first > self.sigma_last && self.sigma_last > 0.0) {
            return Err(Error::parse(format!(
                "need sigma_first > sigma_last > 0, got {} and {}",
                self.sigma_first, self.sigma_last
            )));
        }
        Ok(())
    }

    fn config(&self, epsilon: f64) -> SamplerConfig {
        SamplerConfig {
            scheme: self.scheme,
            epsilon,
            corrector_steps: self.corrector_steps,
            final_denoise: self.final_denoise,
            steps_per_level: self.steps_per_level,
            als_alpha_squared: self.als_alpha_squared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    DomainError,
    Divergent,
}

impl std::fmt::Display for CellStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CellStatus::Ok => "ok",
            CellStatus::DomainError => "domain_error",
            CellStatus::Divergent => "divergent",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub variant: Scheme,
    pub n: usize,
    pub epsilon: f64,
    pub eta: Option<f64>,
    pub beta: Option<f64>,
    pub chains: usize,
    pub diverged: usize,
    pub w_distance: Option<f64>,
    pub q: Option<f64>,
    pub runtime_ms: u128,
    pub status: CellStatus,
}

fn opt(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn run_cell(spec: &SweepSpec, oracle: &dyn ScoreOracle, n_idx: usize, eps_idx: usize) -> SweepRow {
    let start = Instant::now();
    let n = spec.n_values[n_idx];
    let epsilon = spec.epsilons[eps_idx];
    let cell_seed = hash_seed(&[spec.seed, n_idx as u64, eps_idx as u64]);
    let cfg = spec.config(epsilon);
    let mut row = SweepRow {
        variant: spec.scheme,
        n,
        epsilon,
        eta: None,
        beta: None,
        chains: spec.chains,
        diverged: 0,
        w_distance: None,
        q: None,
        runtime_ms: 0,
        status: CellStatus::DomainError,
    };
    let done = |mut r: SweepRow, start: Instant| {
        r.runtime_ms = start.elapsed().as_millis();
        r
    };

    let schedule = match NoiseSchedule::geometric(spec.sigma_first, spec.sigma_last, n) {
        Ok(s) => s,
        Err(_) => return done(row, start),
    };
    // record the implied eta even when it falls outside the admissible band
    row.eta = match spec.scheme {
        Scheme::CasEpsB => eta_from_eps_b(epsilon, schedule.sigma_last()).ok(),
        Scheme::CasEpsC => eta_from_eps_c(epsilon, schedule.gamma()).ok(),
        _ => None,
    };
    let plan = match step_plan(&schedule, &cfg) {
        Ok(p) => p,
        Err(_) => return done(row, start),
    };
    row.eta = row.eta.or(opt(plan.eta));
    row.beta = opt(plan.beta);

    let dim = oracle.dim();
    let mut live: Vec<Vec<f64>> = Vec::with_capacity(spec.chains);
    for k in 0..spec.chains {
        match run_final(oracle, &schedule, &cfg, cell_seed, k as u64, dim, None) {
            Ok((state, false)) => live.push(state),
            Ok((_, true)) => row.diverged += 1,
            Err(_) => return done(row, start),
        }
    }
    if row.diverged * 2 > spec.chains {
        row.status = CellStatus::Divergent;
        return done(row, start);
    }
    let target = match spec.oracle.target_samples(live.len()) {
        Ok(t) => t,
        Err(_) => return done(row, start),
    };
    let w = match spec.metric {
        MetricChoice::W1 => {
            let a: Vec<f64> = live.iter().map(|v| v[0]).collect();
            let b: Vec<f64> = target.iter().map(|v| v[0]).collect();
            w1_empirical_1d(&a, &b)
        }
        MetricChoice::SlicedW2 => sliced_w2(&live, &target, 64, cell_seed),
    };
    match w {
        Ok(w) => {
            row.w_distance = Some(w);
            row.q = Some(QualityScore::from_w(w, live.len(), row.diverged).q);
            row.status = CellStatus::Ok;
        }
        Err(_) => return done(row, start),
    }
    done(row, start)
}

/// Runs every (N, epsilon) cell and returns rows sorted by (N, epsilon).
/// Individual cell failures become status rows; only an invalid spec errors.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let oracle = spec.oracle.build()?;
    let cells: Vec<(usize, usize)> = (0..spec.n_values.len())
        .flat_map(|i| (0..spec.epsilons.len()).map(move |j| (i, j)))
        .collect();
    let mut rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(i, j)| run_cell(spec, oracle.as_ref(), i, j))
        .collect();
    rows.sort_by(|a, b| a.n.cmp(&b.n).then(a.epsilon.total_cmp(&b.epsilon)));
    Ok(rows)
}

fn cell_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("variant,N,epsilon,eta,beta,chains,diverged,w_distance,q,runtime_ms,status\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.variant,
            r.n,
            r.epsilon,
            cell_str(r.eta),
            cell_str(r.beta),
            r.chains,
            r.diverged,
            cell_str(r.w_distance),
            cell_str(r.q),
            r.runtime_ms,
            r.status,
        ));
    }
    out
}

/// Log-spaced grid between lo and hi inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::parse(format!(
            "log grid needs 0 < lo < hi, got {lo} and {hi}"
        )));
    }
    if count < 1 {
        return Err(Error::parse("log grid needs at least one point".to_string()));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (la, lb) = (lo.log10(), hi.log10());
    Ok((0..count)
        .map(|i| 10f64.powf(la + (lb - la) * i as f64 / (count - 1) as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SweepSpec {
        SweepSpec {
            oracle: "gauss:0:0".parse().unwrap(),
            sigma_first: 1.0,
            sigma_last: 0.01,
            n_values: vec![4, 8],
            scheme: Scheme::CasEpsC,
            epsilons: vec![1.0, 2.0],
            chains: 50,
            seed: 3,
            metric: MetricChoice::W1,
            final_denoise: true,
            steps_per_level: 1,
            corrector_steps: 0,
            als_alpha_squared: false,
        }
    }

    #[test]
    fn grid_shape_and_order() {
        let rows = run_sweep(&base_spec()).unwrap();
        assert_eq!(rows.len(), 4);
        let keys: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.epsilon)).collect();
        assert_eq!(keys, vec![(4, 1.0), (4, 2.0), (8, 1.0), (8, 2.0)]);
        for r in &rows {
            assert_eq!(r.status, CellStatus::Ok);
            assert_eq!(r.diverged, 0);
            // point-mass target with final denoise: essentially exact
            assert!(r.w_distance.unwrap() < 1e-6);
            assert!(r.q.unwrap() > 5.0);
        }
    }

    #[test]
    fn sweeps_are_reproducible_modulo_runtime() {
        let a = run_sweep(&base_spec()).unwrap();
        let b = run_sweep(&base_spec()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.epsilon, y.epsilon);
            assert_eq!(x.w_distance.unwrap().to_bits(), y.w_distance.unwrap().to_bits());
            assert_eq!(x.q.unwrap().to_bits(), y.q.unwrap().to_bits());
        }
    }

    #[test]
    fn out_of_band_eta_becomes_domain_error_row() {
        let mut spec = base_spec();
        spec.scheme = Scheme::CasEpsB;
        spec.epsilons = vec![1e-2]; // eta = 100
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert_eq!(r.status, CellStatus::DomainError);
            assert_eq!(r.eta, Some(100.0));
            assert!(r.beta.is_none());
            assert!(r.w_distance.is_none() && r.q.is_none());
        }
    }

    #[test]
    fn diverging_cells_report_divergent_status() {
        let mut spec = base_spec();
        spec.scheme = Scheme::Als;
        spec.epsilons = vec![1e18];
        spec.n_values = vec![16];
        spec.chains = 20;
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].status, CellStatus::Divergent);
        assert_eq!(rows[0].diverged, 20);
        assert!(rows[0].q.is_none());
    }

    #[test]
    fn spec_validation_catches_usage_errors() {
        let mut spec = base_spec();
        spec.chains = 0;
        assert!(run_sweep(&spec).is_err());
        let mut spec = base_spec();
        spec.epsilons.clear();
        assert!(run_sweep(&spec).is_err());
        let mut spec = base_spec();
        spec.n_values = vec![1];
        assert!(run_sweep(&spec).is_err());
        let mut spec = base_spec();
        spec.oracle = "points:0,0,1;1,1,1".parse().unwrap(); // 2-D with w1
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn csv_has_fixed_columns_and_empty_cells() {
        let mut spec = base_spec();
        spec.scheme = Scheme::CasEpsB;
        spec.epsilons = vec![1e-2];
        spec.n_values = vec![4];
        let rows = run_sweep(&spec).unwrap();
        let csv = rows_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "variant,N,epsilon,eta,beta,chains,diverged,w_distance,q,runtime_ms,status"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("cas-b,4,0.01,100,,50,0,,,"));
        assert!(row.ends_with(",domain_error"));
    }

    #[test]
    fn log_grid_endpoints_and_spacing() {
        let g = log_grid(1e-6, 1e-2, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-6).abs() < 1e-18);
        assert!((g[4] - 1e-2).abs() < 1e-14);
        for w in g.windows(2) {
            assert!((w[1] / w[0] - 10.0).abs() < 1e-9);
        }
        assert!(log_grid(0.0, 1.0, 3).is_err());
        assert!(log_grid(1.0, 0.5, 3).is_err());
    }
}
