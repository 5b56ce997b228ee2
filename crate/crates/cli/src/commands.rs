//! The four subcommands. Each returns `Ok(())` or a `Failure` carrying the
//! process exit code; all file/stdout writing happens here.

use crate::args::{
    self, ConfigMap, DiagnoseArgs, ResolvedRun, RunArgs, SampleArgs, SweepArgs, VerifyArgs,
};
use crate::oraclespec::OracleSpec;
use crate::sweep::{log_grid, rows_to_csv, run_sweep, CellStatus, SweepSpec};
use crate::Failure;
use rayon::prelude::*;
use scorelab::analytic::{consistency_report, consistency_report_mc};
use scorelab::sampler::{run_chain, step_plan, ChainTrace, SamplerConfig, Scheme, StepRecord};
use scorelab::schedule::NoiseSchedule;
use scorelab::verify::{run_equivalence_suite, BetaFault};
use scorelab::ScoreOracle;
use serde_json::{json, Number, Value};
use std::path::Path;

const USAGE_SAMPLE: &str = "usage: scorelab sample --scheme <NAME> --eps <F> --n <K> \
--sigma-first <F> --sigma-last <F> --oracle <SPEC> [--chains <K>] [--seed <U>] \
[--final-denoise] [--steps-per-level <K>] [--corrector-steps <K>] [--als-alpha-squared] \
[--config <FILE>] [--out <FILE>]";

const USAGE_DIAGNOSE: &str = "usage: scorelab diagnose --scheme <NAME> --eps <F> --n <K> \
--sigma-first <F> --sigma-last <F> --oracle <SPEC> [--analytic | --mc <CHAINS>] \
[--seed <U>] [--final-denoise] [--steps-per-level <K>] [--corrector-steps <K>] \
[--als-alpha-squared] [--config <FILE>] [--out <FILE>]";

const USAGE_SWEEP: &str = "usage: scorelab sweep --scheme <NAME> --oracle <SPEC> \
--sigma-first <F> --sigma-last <F> --n-list <K,K,...> (--eps-list <F,F,...> | \
--eps-log <LO:HI:COUNT>) [--chains <K>] [--seed <U>] [--metric w1|sliced] \
[--final-denoise] [--steps-per-level <K>] [--corrector-steps <K>] [--als-alpha-squared] \
[--config <FILE>] [--out <FILE>]";

struct Prepared {
    run: ResolvedRun,
    scheme: Scheme,
    oracle: Box<dyn ScoreOracle>,
    schedule: NoiseSchedule,
    cfg: SamplerConfig,
    eta: f64,
    amplification_warning: bool,
}

fn prepare(run_args: &RunArgs) -> Result<Prepared, Failure> {
    let run = run_args.resolve()?;
    let scheme: Scheme = run.scheme.parse().map_err(Failure::from)?;
    let spec: OracleSpec = run.oracle.parse().map_err(Failure::from)?;
    let oracle = spec.build()?;
    let schedule = NoiseSchedule::geometric(run.sigma_first, run.sigma_last, run.n)?;
    let cfg = SamplerConfig {
        scheme,
        epsilon: run.eps,
        corrector_steps: run.corrector_steps,
        final_denoise: run.final_denoise,
        steps_per_level: run.steps_per_level,
        als_alpha_squared: run.als_alpha_squared,
    };
    let plan = step_plan(&schedule, &cfg)?;
    Ok(Prepared {
        run,
        scheme,
        oracle,
        schedule,
        cfg,
        eta: plan.eta,
        amplification_warning: plan.amplification_warning,
    })
}

/// Writes `content` to `path` and the summary to stdout; without a path the
/// content goes to stdout and the summary to stderr, keeping stdout clean.
fn write_or_print(path: Option<&Path>, content: &str, summary: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, content).map_err(|e| {
                Failure::new(1, format!("cannot write {}: {e}", p.display()))
            })?;
            println!("{summary}");
        }
        None => {
            print!("{content}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn num(v: f64) -> Value {
    Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

fn vec_num(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn step_to_json(s: &StepRecord) -> Value {
    json!({
        "level": s.level,
        "kind": s.kind.label(),
        "sigma": num(s.sigma),
        "sigma_next": num(s.sigma_next),
        "eta": num(s.eta),
        "beta": num(s.beta),
        "state_before": vec_num(&s.state_before),
        "state_after": vec_num(&s.state_after),
        "consumed_draw": s.consumed_draw,
    })
}

pub fn trace_to_json(t: &ChainTrace) -> Value {
    json!({
        "config": serde_json::to_value(&t.config).expect("config serializes"),
        "schedule": t.schedule.to_json(),
        "seed": t.seed,
        "chain": t.chain,
        "steps": t.steps.iter().map(step_to_json).collect::<Vec<_>>(),
        "final_state": vec_num(&t.final_state),
        "diverged": t.diverged,
        "amplification_warning": t.amplification_warning,
    })
}

pub fn cmd_sample(a: &SampleArgs) -> Result<(), Failure> {
    let p = prepare(&a.run).map_err(|f| f.with_usage(USAGE_SAMPLE))?;
    let cfgmap = ConfigMap::load(a.run.config.as_deref())?;
    let mut chains_opt = a.chains;
    cfgmap.fill(&mut chains_opt, "chains")?;
    let chains = chains_opt.unwrap_or(1);
    if chains < 1 {
        return Err(Failure::new(1, "chains must be >= 1".into()).with_usage(USAGE_SAMPLE));
    }
    if p.amplification_warning {
        eprintln!(
            "warning: eta = {} lies in (1, 1+gamma]; injected noise exceeds the schedule \
             and errors are amplified",
            p.eta
        );
    }
    let dim = p.oracle.dim();
    let traces: scorelab::Result<Vec<ChainTrace>> = (0..chains)
        .into_par_iter()
        .map(|k| {
            run_chain(
                p.oracle.as_ref(),
                &p.schedule,
                &p.cfg,
                p.run.seed,
                k as u64,
                dim,
                None,
            )
        })
        .collect();
    let traces = traces?;
    let diverged = traces.iter().filter(|t| t.diverged).count();

    let body = if chains == 1 {
        trace_to_json(&traces[0])
    } else {
        Value::Array(traces.iter().map(trace_to_json).collect())
    };
    let text = serde_json::to_string_pretty(&body).expect("trace json") + "\n";

    let mut summary = format!(
        "scheme={} n={} eps={} chains={} diverged={}",
        p.scheme,
        p.run.n,
        p.run.eps,
        chains,
        diverged
    );
    if dim == 1 {
        let finals: Vec<f64> = traces
            .iter()
            .filter(|t| !t.diverged)
            .map(|t| t.final_state[0])
            .collect();
        if !finals.is_empty() {
            let m = finals.iter().sum::<f64>() / finals.len() as f64;
            let var = finals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / finals.len() as f64;
            summary.push_str(&format!(" final_mean={} final_std={}", m, var.sqrt()));
        }
    }
    write_or_print(a.out.as_deref(), &text, &summary)?;
    if diverged == chains {
        return Err(Failure::new(3, format!("all {chains} chains diverged")));
    }
    Ok(())
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> Result<(), Failure> {
    if a.analytic && a.mc.is_some() {
        return Err(
            Failure::new(1, "--analytic and --mc are mutually exclusive".into())
                .with_usage(USAGE_DIAGNOSE),
        );
    }
    let p = prepare(&a.run).map_err(|f| f.with_usage(USAGE_DIAGNOSE))?;
    let report = match a.mc {
        Some(chains) => {
            let (report, _se) =
                consistency_report_mc(p.oracle.as_ref(), &p.schedule, &p.cfg, chains, p.run.seed)?;
            report
        }
        None => consistency_report(p.oracle.as_ref(), &p.schedule, &p.cfg)?,
    };
    let summary = format!("max_deviation={}", report.max_deviation);
    write_or_print(a.out.as_deref(), &report.to_csv(), &summary)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<(), Failure> {
    let fault = a.inject_beta_skew.map(BetaFault::SkewBeta);
    let report = run_equivalence_suite(fault)?;
    for c in &report.checks {
        println!(
            "{} {} (max rel err {:.3e}, tol {:.0e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.max_rel_err,
            c.tol
        );
    }
    if report.passed {
        println!("all {} identities hold", report.checks.len());
        Ok(())
    } else {
        Err(Failure::new(
            4,
            format!("verification failed: {}", report.failed_names().join(", ")),
        ))
    }
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<(), Failure> {
    (|| -> Result<SweepSpec, Failure> {
        let cfgmap = ConfigMap::load(a.run.config.as_deref())?;
        let mut m = a.run.clone();
        cfgmap.fill(&mut m.scheme, "scheme")?;
        cfgmap.fill(&mut m.sigma_first, "sigma-first")?;
        cfgmap.fill(&mut m.sigma_last, "sigma-last")?;
        cfgmap.fill(&mut m.oracle, "oracle")?;
        cfgmap.fill(&mut m.seed, "seed")?;
        cfgmap.fill(&mut m.steps_per_level, "steps-per-level")?;
        cfgmap.fill(&mut m.corrector_steps, "corrector-steps")?;
        let final_denoise = cfgmap.bool_or(m.final_denoise, "final-denoise")?;
        let als_alpha_squared = cfgmap.bool_or(m.als_alpha_squared, "als-alpha-squared")?;
        let mut n_list = a.n_list.clone();
        cfgmap.fill(&mut n_list, "n-list")?;
        let mut eps_list = a.eps_list.clone();
        cfgmap.fill(&mut eps_list, "eps-list")?;
        let mut eps_log = a.eps_log.clone();
        cfgmap.fill(&mut eps_log, "eps-log")?;
        let mut chains = a.chains;
        cfgmap.fill(&mut chains, "chains")?;
        let mut metric = a.metric.clone();
        cfgmap.fill(&mut metric, "metric")?;

        let scheme: Scheme = args::require(m.scheme, "scheme")?.parse()?;
        let oracle: OracleSpec = args::require(m.oracle, "oracle")?.parse()?;
        let epsilons = match (eps_list, eps_log) {
            (Some(_), Some(_)) => {
                return Err(Failure::new(
                    1,
                    "give exactly one of --eps-list and --eps-log".into(),
                ))
            }
            (Some(list), None) => args::parse_list::<f64>(&list, "epsilon")?,
            (None, Some(range)) => {
                let (lo, hi, count) = args::parse_log_range(&range)?;
                log_grid(lo, hi, count)?
            }
            (None, None) => {
                return Err(Failure::new(
                    1,
                    "an epsilon grid is required (--eps-list or --eps-log)".into(),
                ))
            }
        };
        let seed = match m.seed {
            Some(s) => s,
            None => args::default_seed()?,
        };
        Ok(SweepSpec {
            oracle,
            sigma_first: args::require(m.sigma_first, "sigma-first")?,
            sigma_last: args::require(m.sigma_last, "sigma-last")?,
            n_values: args::parse_list(&args::require(n_list, "n-list")?, "N")?,
            scheme,
            epsilons,
            chains: chains.unwrap_or(100),
            seed,
            metric: metric.as_deref().unwrap_or("w1").parse()?,
            final_denoise,
            steps_per_level: m.steps_per_level.unwrap_or(1),
            corrector_steps: m.corrector_steps.unwrap_or(1),
            als_alpha_squared,
        })
    })()
    .map_err(|f| f.with_usage(USAGE_SWEEP))
    .and_then(|spec| {
        let rows = run_sweep(&spec).map_err(|e| Failure::from(e).with_usage(USAGE_SWEEP))?;
        let count = |s: CellStatus| rows.iter().filter(|r| r.status == s).count();
        let summary = format!(
            "cells={} ok={} domain_error={} divergent={}",
            rows.len(),
            count(CellStatus::Ok),
            count(CellStatus::DomainError),
            count(CellStatus::Divergent)
        );
        write_or_print(a.out.as_deref(), &rows_to_csv(&rows), &summary)
    })
}
