use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gas_cli::commands::{cmd_certify, cmd_run, cmd_sweep, Axis, CertifyArgs, RunArgs, SweepArgs};
use gas_cli::oracle_suite::{run_suite, Suite};
use gas_cli::output::fmt_num;
use gas_cli::{CliError, CliResult};

/// Byzantine-robust federated learning experiments with gradient splitting.
///
/// Exit codes: 0 success, 1 check failure, 2 config error, 3 runtime error.
#[derive(Debug, Parser)]
#[command(name = "gasfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment config; writes rounds.csv, summary.txt and manifest.toml.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: one per core). Results do not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
        /// Write measured per-round wall time instead of zero.
        #[arg(long)]
        record_timing: bool,
    },
    /// Run a config once per value of one axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values; the p axis also accepts `d`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        record_timing: bool,
    },
    /// Estimate an aggregator's (f, λ)-resilience.
    Certify {
        /// TOML file with n, f, dim, trials, seed, [aggregator] and [adversary].
        #[arg(long)]
        config: Option<PathBuf>,
        /// Aggregator kind with default hyperparameters, e.g. `median`.
        #[arg(long)]
        aggregator: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        f: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Distance of the adversarial cluster.
        #[arg(long, conflicts_with = "honest_mean")]
        scale: Option<f64>,
        /// Place every adversarial point on the honest mean.
        #[arg(long)]
        honest_mean: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-check an aggregator against its brute-force reference.
    Oracle {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            jobs,
            record_timing,
        } => {
            let result = cmd_run(&RunArgs {
                config,
                out: out.clone(),
                seed,
                jobs,
                record_timing,
            })?;
            println!(
                "best accuracy {} ± {} over {} repeats; outputs in {}",
                fmt_num(result.summary.best_accuracy_mean),
                fmt_num(result.summary.best_accuracy_std),
                result.runs.len(),
                out.display()
            );
        }
        Command::Sweep {
            config,
            out,
            axis,
            values,
            seed,
            jobs,
            record_timing,
        } => {
            let results = cmd_sweep(&SweepArgs {
                config,
                out,
                axis,
                values,
                seed,
                jobs,
                record_timing,
            })?;
            for (value, result) in results {
                println!(
                    "{}={value}: best accuracy {} ± {}",
                    axis.name(),
                    fmt_num(result.summary.best_accuracy_mean),
                    fmt_num(result.summary.best_accuracy_std)
                );
            }
        }
        Command::Certify {
            config,
            aggregator,
            n,
            f,
            dim,
            trials,
            seed,
            scale,
            honest_mean,
            out,
        } => {
            let report = cmd_certify(&CertifyArgs {
                config,
                aggregator,
                n,
                f,
                dim,
                trials,
                seed,
                scale,
                honest_mean_adversary: honest_mean,
                out,
            })?;
            println!("lambda_hat = {}", fmt_num(report.lambda_hat));
        }
        Command::Oracle {
            suite,
            seed,
            trials,
            inject_fault,
        } => {
            let report = run_suite(suite, seed, trials, inject_fault)?;
            println!(
                "{}: {} instances ({} skipped), max discrepancy {:e}",
                suite.name(),
                report.instances,
                report.skipped,
                report.max_discrepancy
            );
            if let Some((instance, gap)) = report.failure {
                return Err(CliError::Check(format!(
                    "{} instance {instance} (seed {seed}) off by {gap:e}, tolerance {:e}",
                    suite.name(),
                    suite.tolerance()
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gasfl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
