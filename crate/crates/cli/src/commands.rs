//! The `run`, `sweep` and `certify` subcommands.

use std::path::{Path, PathBuf};

use gas_core::aggregators::{estimate_resilience, Adversary};
use gas_core::fedsim::{run_experiment, Defense, ExperimentConfig, ExperimentResult};
use gas_core::SeedSpec;
use rand::Rng;
use rayon::prelude::*;

use crate::config::{emit_experiment, load_certify, load_experiment, CertifyConfig, RunManifest};
use crate::output::{fmt_num, rounds_csv, summary_text, sweep_csv, write_atomic};
use crate::{CliError, CliResult};

/// A rayon pool with `jobs` threads (`None` = one per core).
pub fn pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn execute(cfg: &ExperimentConfig) -> CliResult<ExperimentResult> {
    run_experiment(cfg).map_err(|e| match e {
        gas_core::Error::Round { .. } => CliError::Runtime(e.to_string()),
        other => CliError::Config(other.to_string()),
    })
}

/// Writes `rounds.csv`, `summary.txt` and `manifest.toml` into `out`.
fn write_run(out: &Path, cfg: &ExperimentConfig, result: &ExperimentResult, record_timing: bool) -> CliResult<()> {
    let manifest = RunManifest::new(cfg.clone(), record_timing);
    write_atomic(&out.join(&manifest.outputs.rounds_csv), &rounds_csv(&result.runs, record_timing))?;
    write_atomic(
        &out.join(&manifest.outputs.summary),
        summary_text(cfg, &result.summary).as_bytes(),
    )?;
    write_atomic(&out.join("manifest.toml"), manifest.emit().as_bytes())
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub record_timing: bool,
}

pub fn cmd_run(args: &RunArgs) -> CliResult<ExperimentResult> {
    let mut cfg = load_experiment(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let result = pool(args.jobs)?.install(|| execute(&cfg))?;
    write_run(&args.out, &cfg, &result, args.record_timing)?;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    P,
    Delta,
    Beta,
    F,
    N,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::P => "p",
            Axis::Delta => "delta",
            Axis::Beta => "beta",
            Axis::F => "f",
            Axis::N => "n",
        }
    }
}

fn parse_value<T: std::str::FromStr>(axis: Axis, raw: &str) -> CliResult<T> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("--values: `{raw}` is not a valid {} value", axis.name())))
}

/// Applies one swept value; returns the value as written to the CSV.
pub fn apply_axis(cfg: &mut ExperimentConfig, axis: Axis, raw: &str) -> CliResult<String> {
    let dim = cfg.network().dim();
    match (axis, &mut cfg.defense) {
        (Axis::P, Defense::Gas { p, .. }) => {
            *p = if raw.trim() == "d" { dim } else { parse_value(axis, raw)? };
            Ok(p.to_string())
        }
        (Axis::Delta, Defense::Gas { delta, .. }) => {
            let v: f64 = parse_value(axis, raw)?;
            *delta = Some(v);
            Ok(v.to_string())
        }
        (Axis::P | Axis::Delta, other) => Err(CliError::Config(format!(
            "--axis {} needs a gas defense, config has {}",
            axis.name(),
            other.label()
        ))),
        (Axis::Beta, _) => {
            cfg.beta = parse_value(axis, raw)?;
            Ok(cfg.beta.to_string())
        }
        (Axis::F, _) => {
            cfg.f = parse_value(axis, raw)?;
            Ok(cfg.f.to_string())
        }
        (Axis::N, _) => {
            cfg.n = parse_value(axis, raw)?;
            Ok(cfg.n.to_string())
        }
    }
}

/// Master seed of sweep point `index`, derived from the base seed and axis.
pub fn sweep_seed(base: u64, axis: Axis, index: usize) -> u64 {
    SeedSpec::new(base)
        .derive("sweep", 0)
        .derive(axis.name(), index as u64)
        .rng()
        .random()
}

#[derive(Debug, Clone)]
pub struct SweepArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub axis: Axis,
    pub values: Vec<String>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub record_timing: bool,
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<Vec<(String, ExperimentResult)>> {
    let mut base = load_experiment(&args.config)?;
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    if args.values.is_empty() {
        return Err(CliError::Config("--values: at least one value is required".into()));
    }
    let mut points = Vec::with_capacity(args.values.len());
    for (i, raw) in args.values.iter().enumerate() {
        let mut cfg = base.clone();
        let shown = apply_axis(&mut cfg, args.axis, raw)?;
        cfg.seed = sweep_seed(base.seed, args.axis, i);
        cfg.validate()
            .map_err(|e| CliError::Config(format!("{}={shown}: {e}", args.axis.name())))?;
        points.push((shown, cfg));
    }

    let results = pool(args.jobs)?.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, (_, cfg))| {
                let result = execute(cfg)?;
                let dir = args.out.join(format!("{}-{i}", args.axis.name()));
                write_run(&dir, cfg, &result, args.record_timing)?;
                Ok(result)
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let labelled: Vec<(String, ExperimentResult)> = points.into_iter().map(|(v, _)| v).zip(results).collect();
    let combined: Vec<(String, Vec<_>)> = labelled.iter().map(|(v, r)| (v.clone(), r.runs.clone())).collect();
    write_atomic(
        &args.out.join("sweep.csv"),
        &sweep_csv(args.axis.name(), &combined, args.record_timing),
    )?;
    let mut summary = format!("axis = {}\nconfig_seed = {}\n", args.axis.name(), base.seed);
    for (value, result) in &labelled {
        summary.push_str(&format!(
            "{}={value}: best_accuracy_mean = {}, best_accuracy_std = {}\n",
            args.axis.name(),
            fmt_num(result.summary.best_accuracy_mean),
            fmt_num(result.summary.best_accuracy_std)
        ));
    }
    write_atomic(&args.out.join("sweep_summary.txt"), summary.as_bytes())?;
    write_atomic(&args.out.join("base_config.toml"), emit_experiment(&base).as_bytes())?;
    Ok(labelled)
}

#[derive(Debug, Clone, Default)]
pub struct CertifyArgs {
    pub config: Option<PathBuf>,
    pub aggregator: Option<String>,
    pub n: Option<usize>,
    pub f: Option<usize>,
    pub dim: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub scale: Option<f64>,
    pub honest_mean_adversary: bool,
    pub out: PathBuf,
}

/// Resolves flags over an optional config file.
pub fn certify_config(args: &CertifyArgs) -> CliResult<CertifyConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_certify(path)?,
        None => {
            let missing = |flag: &str| CliError::Config(format!("{flag} is required without --config"));
            CertifyConfig {
                n: args.n.ok_or_else(|| missing("--n"))?,
                f: args.f.ok_or_else(|| missing("--f"))?,
                dim: 10,
                trials: 1000,
                seed: 0,
                aggregator: crate::config::aggregator_by_name(args.aggregator.as_deref().ok_or_else(|| missing("--aggregator"))?)?,
                adversary: Adversary::default(),
            }
        }
    };
    if args.config.is_some() {
        if let Some(name) = &args.aggregator {
            cfg.aggregator = crate::config::aggregator_by_name(name)?;
        }
        cfg.n = args.n.unwrap_or(cfg.n);
        cfg.f = args.f.unwrap_or(cfg.f);
    }
    cfg.dim = args.dim.unwrap_or(cfg.dim);
    cfg.trials = args.trials.unwrap_or(cfg.trials);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    if let Some(scale) = args.scale {
        cfg.adversary = Adversary::Distant { scale };
    }
    if args.honest_mean_adversary {
        cfg.adversary = Adversary::HonestMean;
    }
    Ok(cfg)
}

pub fn cmd_certify(args: &CertifyArgs) -> CliResult<gas_core::aggregators::ResilienceReport> {
    let cfg = certify_config(args)?;
    cfg.aggregator
        .validate(cfg.n, cfg.f)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let report = estimate_resilience(
        &cfg.aggregator,
        cfg.n,
        cfg.f,
        cfg.dim,
        cfg.trials,
        cfg.adversary,
        &SeedSpec::new(cfg.seed),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let finite = report.ratios.iter().all(|r| r.is_finite());
    let mean_ratio = report.ratios.iter().sum::<f64>() / report.ratios.len() as f64;
    let adversary = match cfg.adversary {
        Adversary::Distant { scale } => format!("distant(scale={})", fmt_num(scale)),
        Adversary::HonestMean => "honest_mean".into(),
    };
    let text = format!(
        "aggregator = {}\nadversary = {adversary}\nn = {}\nf = {}\ndim = {}\ntrials = {}\nskipped = {}\nseed = {}\nlambda_hat = {}\nmean_ratio = {}\nfinite = {finite}\n",
        cfg.aggregator.name(),
        report.n,
        report.f,
        report.dim,
        report.trials,
        report.skipped,
        cfg.seed,
        fmt_num(report.lambda_hat),
        fmt_num(mean_ratio),
    );
    write_atomic(&args.out, text.as_bytes())?;
    Ok(report)
}
