//! The oracle mini-language used on the command line:
//!
//! * `gauss:<mean>:<std>` — 1-D Gaussian data distribution,
//! * `points:<x1,w1;x2,w2;...>` — weighted point cloud; within an atom the
//!   last comma-separated number is the weight, everything before it the
//!   coordinates,
//! * `noisy:<inner>:<rho>:<seed>` — wraps any inner oracle in a frozen
//!   pseudo-random score perturbation of relative strength rho.
//!
//! `noisy` is parsed from the right so the inner description may itself
//! contain colons.

use scorelab::oracle::{GaussianOracle, NoisyOracle, PointCloudOracle, ScoreOracle};
use scorelab::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec {
    Gauss { mean: f64, std: f64 },
    Points { atoms: Vec<Vec<f64>>, weights: Vec<f64> },
    Noisy { inner: Box<OracleSpec>, rho: f64, seed: u64 },
}

fn parse_num(tok: &str, what: &str) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| Error::parse(format!("cannot parse {what} from '{tok}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(format!("{what} must be finite, got '{tok}'")));
    }
    Ok(v)
}

impl std::str::FromStr for OracleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("gauss:") {
            let (mean_s, std_s) = rest
                .split_once(':')
                .ok_or_else(|| Error::parse(format!("expected gauss:<mean>:<std>, got '{s}'")))?;
            let mean = parse_num(mean_s, "gauss mean")?;
            let std = parse_num(std_s, "gauss std")?;
            if std < 0.0 {
                return Err(Error::parse(format!("gauss std must be >= 0, got {std}")));
            }
            Ok(OracleSpec::Gauss { mean, std })
        } else if let Some(rest) = s.strip_prefix("points:") {
            let mut atoms = Vec::new();
            let mut weights = Vec::new();
            for atom in rest.split(';') {
                let toks: Vec<&str> = atom.split(',').collect();
                if toks.len() < 2 {
                    return Err(Error::parse(format!(
                        "each atom needs at least one coordinate and a weight, got '{atom}'"
                    )));
                }
                let (coord_toks, w_tok) = toks.split_at(toks.len() - 1);
                let coords = coord_toks
                    .iter()
                    .map(|t| parse_num(t, "atom coordinate"))
                    .collect::<Result<Vec<f64>>>()?;
                let w = parse_num(w_tok[0], "atom weight")?;
                if w < 0.0 {
                    return Err(Error::parse(format!("atom weight must be >= 0, got {w}")));
                }
                atoms.push(coords);
                weights.push(w);
            }
            if atoms.is_empty() {
                return Err(Error::parse("points oracle needs at least one atom".to_string()));
            }
            let dim = atoms[0].len();
            if atoms.iter().any(|a| a.len() != dim) {
                return Err(Error::parse("all atoms must share one dimension".to_string()));
            }
            if weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::parse("atom weights must not all be zero".to_string()));
            }
            Ok(OracleSpec::Points { atoms, weights })
        } else if let Some(rest) = s.strip_prefix("noisy:") {
            // rightmost two fields are rho and seed; the rest is the inner spec
            let (head, seed_s) = rest
                .rsplit_once(':')
                .ok_or_else(|| Error::parse(format!("expected noisy:<inner>:<rho>:<seed>, got '{s}'")))?;
            let (inner_s, rho_s) = head
                .rsplit_once(':')
                .ok_or_else(|| Error::parse(format!("expected noisy:<inner>:<rho>:<seed>, got '{s}'")))?;
            let rho = parse_num(rho_s, "noisy rho")?;
            if rho < 0.0 {
                return Err(Error::parse(format!("noisy rho must be >= 0, got {rho}")));
            }
            let seed: u64 = seed_s
                .trim()
                .parse()
                .map_err(|_| Error::parse(format!("cannot parse noisy seed from '{seed_s}'")))?;
            let inner: OracleSpec = inner_s.parse()?;
            Ok(OracleSpec::Noisy { inner: Box::new(inner), rho, seed })
        } else {
            Err(Error::parse(format!(
                "unknown oracle '{s}' (expected gauss:<mean>:<std>, points:<x,w;...> or noisy:<inner>:<rho>:<seed>)"
            )))
        }
    }
}

impl OracleSpec {
    pub fn dim(&self) -> usize {
        match self {
            OracleSpec::Gauss { .. } => 1,
            OracleSpec::Points { atoms, .. } => atoms[0].len(),
            OracleSpec::Noisy { inner, .. } => inner.dim(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn ScoreOracle>> {
        match self {
            OracleSpec::Gauss { mean, std } => {
                Ok(Box::new(GaussianOracle::scalar(*mean, *std)?))
            }
            OracleSpec::Points { atoms, weights } => {
                Ok(Box::new(PointCloudOracle::new(atoms.clone(), weights.clone())?))
            }
            OracleSpec::Noisy { inner, rho, seed } => {
                Ok(Box::new(NoisyOracle::new(inner.build()?, *rho, *seed)?))
            }
        }
    }

    /// Closed-form (mean, std) of the data distribution when it is Gaussian.
    pub fn target_gaussian(&self) -> Option<(f64, f64)> {
        match self {
            OracleSpec::Gauss { mean, std } => Some((*mean, *std)),
            OracleSpec::Noisy { inner, .. } => inner.target_gaussian(),
            OracleSpec::Points { .. } => None,
        }
    }

    /// Deterministic reference sample of size m from the data distribution:
    /// a mid-point quantile ladder for Gaussians, a largest-remainder atom
    /// allocation for point clouds. The noisy wrapper targets its inner
    /// distribution — the perturbation is model error, not signal.
    pub fn target_samples(&self, m: usize) -> Result<Vec<Vec<f64>>> {
        if m == 0 {
            return Err(Error::InsufficientSamples { got: 0, need: 1 });
        }
        match self {
            OracleSpec::Gauss { mean, std } => {
                if *std == 0.0 {
                    return Ok(vec![vec![*mean]; m]);
                }
                let normal = Normal::new(*mean, *std)
                    .map_err(|e| Error::domain(format!("bad gaussian target: {e}")))?;
                Ok((0..m)
                    .map(|i| vec![normal.inverse_cdf((i as f64 + 0.5) / m as f64)])
                    .collect())
            }
            OracleSpec::Points { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let quotas: Vec<f64> = weights.iter().map(|w| w / total * m as f64).collect();
                let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
                let assigned: usize = counts.iter().sum();
                // hand the leftover samples to the largest fractional quotas
                let mut order: Vec<usize> = (0..atoms.len()).collect();
                order.sort_by(|&a, &b| {
                    let fa = quotas[a] - quotas[a].floor();
                    let fb = quotas[b] - quotas[b].floor();
                    fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
                });
                for &j in order.iter().take(m - assigned) {
                    counts[j] += 1;
                }
                let mut out = Vec::with_capacity(m);
                for (atom, count) in atoms.iter().zip(&counts) {
                    out.extend(std::iter::repeat(atom.clone()).take(*count));
                }
                Ok(out)
            }
            OracleSpec::Noisy { inner, .. } => inner.target_samples(m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_gauss() {
        let s: OracleSpec = "gauss:0.5:2".parse().unwrap();
        assert_eq!(s, OracleSpec::Gauss { mean: 0.5, std: 2.0 });
        assert_eq!(s.dim(), 1);
        assert!("gauss:0".parse::<OracleSpec>().is_err());
        assert!("gauss:a:1".parse::<OracleSpec>().is_err());
        assert!("gauss:0:-1".parse::<OracleSpec>().is_err());
    }

    #[test]
    fn parses_points_with_trailing_weight() {
        let s: OracleSpec = "points:-0.5,1;0.5,1".parse().unwrap();
        match &s {
            OracleSpec::Points { atoms, weights } => {
                assert_eq!(atoms, &vec![vec![-0.5], vec![0.5]]);
                assert_eq!(weights, &vec![1.0, 1.0]);
            }
            _ => panic!(),
        }
        // multi-dimensional atoms: coordinates then weight
        let s: OracleSpec = "points:0,0,1;1,1,2".parse().unwrap();
        assert_eq!(s.dim(), 2);
        assert!("points:1".parse::<OracleSpec>().is_err());
        assert!("points:0,1;1,2,1".parse::<OracleSpec>().is_err()); // ragged dims
        assert!("points:0,0;1,0".parse::<OracleSpec>().is_err()); // all-zero weights
    }

    #[test]
    fn parses_noisy_from_the_right() {
        let s: OracleSpec = "noisy:gauss:0:1:0.1:7".parse().unwrap();
        match s {
            OracleSpec::Noisy { inner, rho, seed } => {
                assert_eq!(*inner, OracleSpec::Gauss { mean: 0.0, std: 1.0 });
                assert_eq!(rho, 0.1);
                assert_eq!(seed, 7);
            }
            _ => panic!(),
        }
        let s: OracleSpec = "noisy:points:-0.5,1;0.5,1:0.25:42".parse().unwrap();
        assert_eq!(s.dim(), 1);
        // missing seed: the trailing field fails to parse as an integer
        assert!("noisy:gauss:0:1:0.1".parse::<OracleSpec>().is_err());
        assert!("noisy:gauss:0:1:-0.1:7".parse::<OracleSpec>().is_err());
    }

    #[test]
    fn unknown_heads_are_rejected() {
        assert!("spline:1:2".parse::<OracleSpec>().is_err());
        assert!("".parse::<OracleSpec>().is_err());
    }

    #[test]
    fn gaussian_ladder_matches_moments() {
        let s: OracleSpec = "gauss:1:2".parse().unwrap();
        let m = 10_000;
        let ladder = s.target_samples(m).unwrap();
        let mean: f64 = ladder.iter().map(|v| v[0]).sum::<f64>() / m as f64;
        let var: f64 =
            ladder.iter().map(|v| (v[0] - mean) * (v[0] - mean)).sum::<f64>() / m as f64;
        assert!((mean - 1.0).abs() < 1e-3);
        assert!((var.sqrt() - 2.0).abs() < 1e-2);
        // degenerate gaussian collapses to copies of the mean
        let s: OracleSpec = "gauss:3:0".parse().unwrap();
        assert!(s.target_samples(5).unwrap().iter().all(|v| v[0] == 3.0));
    }

    #[test]
    fn point_ladder_uses_largest_remainder() {
        let s: OracleSpec = "points:-1,1;1,1".parse().unwrap();
        let lad = s.target_samples(2000).unwrap();
        let neg = lad.iter().filter(|v| v[0] < 0.0).count();
        assert_eq!(neg, 1000);
        // odd count: the tie goes to the first atom
        let lad = s.target_samples(5).unwrap();
        let neg = lad.iter().filter(|v| v[0] < 0.0).count();
        assert_eq!(neg, 3);
        // 1:3 weights over 8 samples split exactly
        let s: OracleSpec = "points:0,1;1,3".parse().unwrap();
        let lad = s.target_samples(8).unwrap();
        assert_eq!(lad.iter().filter(|v| v[0] == 0.0).count(), 2);
    }

    #[test]
    fn builds_working_oracles() {
        for spec in ["gauss:0:1", "points:-0.5,1;0.5,1", "noisy:gauss:0:1:0.1:7"] {
            let s: OracleSpec = spec.parse().unwrap();
            let o = s.build().unwrap();
            let sc = o.score(&vec![0.3; s.dim()], 0.5).unwrap();
            assert!(sc.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn target_gaussian_passes_through_noise() {
        let s: OracleSpec = "noisy:gauss:0.5:1.5:0.2:9".parse().unwrap();
        assert_eq!(s.target_gaussian(), Some((0.5, 1.5)));
        let s: OracleSpec = "points:0,1".parse().unwrap();
        assert_eq!(s.target_gaussian(), None);
    }
}
