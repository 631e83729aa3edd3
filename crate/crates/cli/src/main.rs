//! Experiment CLI: dataset generation, pairwise SGD/SGDA training with
//! adaptive pair sampling, stability tail checks, PAC-Bayes bound
//! evaluation, rate sweeps, and occupancy-coverage checks.
//!
//! Exit status: 0 success; 2 configuration error; 3 certification failure;
//! 4 a verification subcommand ran and FAILED its check; 1 internal error.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::Outcome;
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pairlearn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config's out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for Monte Carlo fan-out (default: all cores).
    /// Results are independent of this setting.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic dataset file.
    GenData,
    /// Run the configured algorithm and persist a replayable run record.
    Train,
    /// Monte Carlo sub-exponential stability tail check.
    Stability,
    /// Evaluate the explicit-constant PAC-Bayes bound.
    Bound {
        /// Evaluate an existing run record instead of running fresh.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Generalization-rate sweep over an n grid.
    Sweep,
    /// Occupancy-coverage check of the Chernoff bound.
    Chernoff,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_CERTIFICATION: u8 = 3;
const EXIT_ACCEPTANCE_FAIL: u8 = 4;

fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<pairlearn::Error>() {
            return match core {
                pairlearn::Error::CertificationFailure(_) => EXIT_CERTIFICATION,
                _ => EXIT_CONFIG,
            };
        }
    }
    EXIT_CONFIG
}

fn run() -> anyhow::Result<Outcome> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // results never depend on thread count; this only sizes the pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("--config PATH is required"))?;
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    let out = cli.out.unwrap_or_else(|| cfg.out_dir());
    match cli.command {
        Command::GenData => commands::gen_data(&cfg, &out),
        Command::Train => commands::train(&cfg, &out),
        Command::Stability => commands::stability(&cfg, &out),
        Command::Bound { run } => commands::bound(&cfg, &out, run.as_deref()),
        Command::Sweep => commands::sweep(&cfg, &out),
        Command::Chernoff => commands::chernoff(&cfg, &out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::AcceptanceFail) => ExitCode::from(EXIT_ACCEPTANCE_FAIL),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
