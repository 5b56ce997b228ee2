//! Flag definitions and the flat `key = value` config-file loader.
//! Every run parameter is optional at the clap layer; required-ness is
//! enforced after merging flags with the config file (flags win).

use clap::{ArgAction, Args, Parser, Subcommand};
use scorelab::{Error, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "scorelab",
    version,
    about = "Sampling laboratory for score-based generative models",
    disable_help_subcommand = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run sampling chains and write JSON traces
    Sample(SampleArgs),
    /// Compare the effective per-level noise against the prescribed schedule
    Diagnose(DiagnoseArgs),
    /// Check the algebraic identities relating the sampling schemes
    Verify(VerifyArgs),
    /// Sweep an (N, epsilon) grid and score each cell
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct RunArgs {
    /// Sampling scheme: als | cas-b | cas-c | pc | denoise-interp | noise-denoise
    #[arg(long)]
    pub scheme: Option<String>,

    /// Step-size parameter (meaning depends on the scheme)
    #[arg(long)]
    pub eps: Option<f64>,

    /// Number of noise levels N
    #[arg(long)]
    pub n: Option<usize>,

    /// Largest noise level sigma_1
    #[arg(long = "sigma-first")]
    pub sigma_first: Option<f64>,

    /// Smallest noise level sigma_N
    #[arg(long = "sigma-last")]
    pub sigma_last: Option<f64>,

    /// Oracle: gauss:MEAN:STD | points:X1,W1;X2,W2;... | noisy:INNER:RHO:SEED
    #[arg(long)]
    pub oracle: Option<String>,

    /// Base RNG seed (default: $SCORELAB_SEED, else 0)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Append the deterministic final denoising step
    #[arg(long = "final-denoise", action = ArgAction::SetTrue)]
    pub final_denoise: bool,

    /// Langevin updates per level (ALS only)
    #[arg(long = "steps-per-level")]
    pub steps_per_level: Option<usize>,

    /// Corrector updates per level (PC only)
    #[arg(long = "corrector-steps")]
    pub corrector_steps: Option<usize>,

    /// Use the alpha ~ sigma^2 ALS step-size convention
    #[arg(long = "als-alpha-squared", action = ArgAction::SetTrue)]
    pub als_alpha_squared: bool,

    /// Flat key=value config file; command-line flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// Number of independent chains
    #[arg(long)]
    pub chains: Option<usize>,

    /// Write the JSON trace here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// Use exact analytic propagation (the default)
    #[arg(long, action = ArgAction::SetTrue)]
    pub analytic: bool,

    /// Estimate by Monte Carlo with this many chains instead
    #[arg(long)]
    pub mc: Option<usize>,

    /// Write the CSV report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Multiply every CAS noise coefficient by this factor (test hook)
    #[arg(long = "inject-beta-skew", hide = true)]
    pub inject_beta_skew: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// Comma-separated list of N values, e.g. 8,32,128
    #[arg(long = "n-list")]
    pub n_list: Option<String>,

    /// Comma-separated explicit epsilon grid
    #[arg(long = "eps-list")]
    pub eps_list: Option<String>,

    /// Log-spaced epsilon grid LO:HI:COUNT
    #[arg(long = "eps-log")]
    pub eps_log: Option<String>,

    /// Chains per grid cell
    #[arg(long)]
    pub chains: Option<usize>,

    /// Distance metric: w1 | sliced
    #[arg(long)]
    pub metric: Option<String>,

    /// Write the sweep CSV here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flat `key = value` file. `#` starts a comment; blank lines are ignored.
/// Keys use the long-flag spelling (e.g. `sigma-first = 1.0`).
#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::parse(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(format!("config line {}: expected key = value", lineno + 1))
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub(crate) fn fill<T: std::str::FromStr>(&self, slot: &mut Option<T>, key: &str) -> Result<()> {
        if slot.is_none() {
            if let Some(raw) = self.get(key) {
                let v = raw.parse().map_err(|_| {
                    Error::parse(format!("config key '{key}': cannot parse value '{raw}'"))
                })?;
                *slot = Some(v);
            }
        }
        Ok(())
    }

    pub(crate) fn bool_or(&self, current: bool, key: &str) -> Result<bool> {
        if current {
            return Ok(true);
        }
        match self.get(key) {
            None => Ok(false),
            Some(raw) => match raw {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                other => Err(Error::parse(format!(
                    "config key '{key}': expected a boolean, got '{other}'"
                ))),
            },
        }
    }
}

/// A fully merged and validated set of run parameters.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub scheme: String,
    pub eps: f64,
    pub n: usize,
    pub sigma_first: f64,
    pub sigma_last: f64,
    pub oracle: String,
    pub seed: u64,
    pub final_denoise: bool,
    pub steps_per_level: usize,
    pub corrector_steps: usize,
    pub als_alpha_squared: bool,
}

pub(crate) fn default_seed() -> Result<u64> {
    match std::env::var("SCORELAB_SEED") {
        Ok(raw) => raw
            .parse()
            .map_err(|_| Error::parse(format!("SCORELAB_SEED must be a u64, got '{raw}'"))),
        Err(_) => Ok(0),
    }
}

pub(crate) fn require<T>(slot: Option<T>, flag: &str) -> Result<T> {
    slot.ok_or_else(|| Error::parse(format!("missing required parameter --{flag}")))
}

impl RunArgs {
    /// Merges flags over the config file and checks that everything a run
    /// needs is present. Returns a usage error (exit 1) otherwise.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let cfg = ConfigMap::load(self.config.as_deref())?;
        let mut merged = self.clone();
        cfg.fill(&mut merged.scheme, "scheme")?;
        cfg.fill(&mut merged.eps, "eps")?;
        cfg.fill(&mut merged.n, "n")?;
        cfg.fill(&mut merged.sigma_first, "sigma-first")?;
        cfg.fill(&mut merged.sigma_last, "sigma-last")?;
        cfg.fill(&mut merged.oracle, "oracle")?;
        cfg.fill(&mut merged.seed, "seed")?;
        cfg.fill(&mut merged.steps_per_level, "steps-per-level")?;
        cfg.fill(&mut merged.corrector_steps, "corrector-steps")?;
        let final_denoise = cfg.bool_or(merged.final_denoise, "final-denoise")?;
        let als_alpha_squared = cfg.bool_or(merged.als_alpha_squared, "als-alpha-squared")?;
        let seed = match merged.seed {
            Some(s) => s,
            None => default_seed()?,
        };
        Ok(ResolvedRun {
            scheme: require(merged.scheme, "scheme")?,
            eps: require(merged.eps, "eps")?,
            n: require(merged.n, "n")?,
            sigma_first: require(merged.sigma_first, "sigma-first")?,
            sigma_last: require(merged.sigma_last, "sigma-last")?,
            oracle: require(merged.oracle, "oracle")?,
            seed,
            final_denoise,
            steps_per_level: merged.steps_per_level.unwrap_or(1),
            corrector_steps: merged.corrector_steps.unwrap_or(1),
            als_alpha_squared,
        })
    }
}

pub fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::parse(format!("cannot parse {what} entry '{s}'")))
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::parse(format!("{what} list is empty")));
    }
    Ok(items)
}

/// Parses "LO:HI:COUNT" into the arguments of a log-spaced grid.
pub fn parse_log_range(raw: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::parse(format!(
            "log range must look like LO:HI:COUNT, got '{raw}'"
        )));
    }
    let lo = parts[0]
        .parse()
        .map_err(|_| Error::parse(format!("bad log-range low endpoint '{}'", parts[0])))?;
    let hi = parts[1]
        .parse()
        .map_err(|_| Error::parse(format!("bad log-range high endpoint '{}'", parts[1])))?;
    let count = parts[2]
        .parse()
        .map_err(|_| Error::parse(format!("bad log-range count '{}'", parts[2])))?;
    Ok((lo, hi, count))
}
