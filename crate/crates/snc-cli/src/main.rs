//! `snc`: experiment runner for the stochastic service curve workbench.
//!
//! Exit codes: 0 = all checks passed, 1 = at least one dominance or
//! sample-path check failed, 2 = configuration error.

mod config;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "snc", about = "Delay-bound experiments for a constant-capacity node")]
struct Cli {
    /// Flat `key = value` configuration file (defaults used when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single flow through the node: delay CCDF vs bounds vs exact M/M/1.
    SingleFlow,
    /// Two flows under non-preemptive priority: traversing delay vs bounds.
    CrossTraffic,
    /// Load x share grid: exact mean vs closed-form mean bound.
    Sweep,
    /// The folklore constant-capacity output formula counterexample.
    Pitfall,
    /// Run the abridged validation battery.
    ValidateAll,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    let outcome = match cli.command {
        Command::SingleFlow => runs::run_single_flow(&cfg, &cli.out),
        Command::CrossTraffic => runs::run_cross_traffic(&cfg, &cli.out),
        Command::Sweep => runs::run_sweep(&cfg, &cli.out),
        Command::Pitfall => runs::run_pitfall(&cli.out),
        Command::ValidateAll => runs::run_validate_all(&cfg, &cli.out),
    };

    match outcome {
        Ok(true) => {
            println!("all checks passed");
            ExitCode::SUCCESS
        }
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
