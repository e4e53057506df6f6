//! `mixedctrl`: solve, validate and sweep mixed-strategy chance-constrained
//! control problems described by JSON run configs.

mod config;
mod policy;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::run::{execute, Command, Failure};

#[derive(Debug, Parser)]
#[command(name = "mixedctrl", version, about = "Mixed-strategy chance-constrained control")]
struct Cli {
    /// Monte Carlo seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Bisection bracket width on the multiplier.
    #[arg(long, global = true)]
    tol_lambda: Option<f64>,
    /// Bisection stops once an endpoint risk is this close to the bound.
    #[arg(long, global = true)]
    tol_risk: Option<f64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Solve for the optimal mixture and write report.json, dual_trace.csv
    /// and the policy files.
    Solve { config: PathBuf },
    /// Re-check a saved report: optimality conditions and Monte Carlo.
    Validate { config: PathBuf },
    /// Sample the dual function on a grid of multipliers.
    Sweep { config: PathBuf },
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("MIXEDCTRL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::config(anyhow!("MIXEDCTRL_THREADS={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot size the worker pool")
        .map_err(Failure::solve)
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let (command, path) = match cli.command {
        Cmd::Solve { config } => (Command::Solve, config),
        Cmd::Validate { config } => (Command::Validate, config),
        Cmd::Sweep { config } => (Command::Sweep, config),
    };
    let mut config = RunConfig::load(&path).map_err(Failure::config)?;
    if let Some(seed) = cli.seed {
        config.monte_carlo.seed = seed;
    }
    if let Some(t) = cli.tol_lambda {
        if !(t > 0.0) {
            return Err(Failure::config(anyhow!("--tol-lambda must be positive")));
        }
        config.solver.tol_lambda = t;
    }
    if let Some(t) = cli.tol_risk {
        if !(t >= 0.0) {
            return Err(Failure::config(anyhow!("--tol-risk must be non-negative")));
        }
        config.solver.tol_risk = t;
    }
    if let Some(out) = cli.out {
        config.out = out;
    }
    log::info!("running {:?} on a {} problem", command, config.kind.name());
    execute(command, &config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
