//! `koopman`: fit parametric Koopman models and run reprojected predictions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use env_logger::Env;

use crate::output::{CliResult, Failure};

#[derive(Debug, Parser)]
#[command(
    name = "koopman",
    version,
    about = "Reprojected parametric Koopman prediction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample snapshots, fit the block model and covariance surrogate, write the model file.
    Fit(Common),
    /// Run every predictor / parameter / initial state combination.
    Predict(WithModel),
    /// One-step maps over a state grid for a parameter sweep (scalar systems).
    Bifurcation(WithModel),
    /// Newton step-norm sequences at regular checkpoints, warm and cold started.
    NewtonBench(WithModel),
    /// Adaptive multistep prediction across trigger factors.
    Multistep(WithModel),
    /// Ground-truth trajectories only.
    Simulate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct WithModel {
    #[command(flatten)]
    common: Common,
    /// Model file; defaults to `model.json` in the output directory.
    #[arg(long)]
    model: Option<PathBuf>,
}

fn setup(c: &Common) -> CliResult<config::Resolved> {
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads: {e}")))?;
    }
    let raw = config::read(&c.config).map_err(Failure::Config)?;
    config::resolve(raw, c.seed, c.out.clone())
        .map_err(|e| Failure::Config(format!("{}: {e}", c.config.display())))
}

fn model_path(r: &config::Resolved, m: &WithModel) -> PathBuf {
    m.model
        .clone()
        .unwrap_or_else(|| r.output_dir().join(commands::MODEL_FILE))
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Fit(c) => commands::fit(&setup(c)?),
        Command::Simulate(c) => commands::simulate(&setup(c)?),
        Command::Predict(m) => {
            let r = setup(&m.common)?;
            commands::predict_cmd(&r, &model_path(&r, m))
        }
        Command::Bifurcation(m) => {
            let r = setup(&m.common)?;
            commands::bifurcation(&r, &model_path(&r, m))
        }
        Command::NewtonBench(m) => {
            let r = setup(&m.common)?;
            commands::newton_bench(&r, &model_path(&r, m))
        }
        Command::Multistep(m) => {
            let r = setup(&m.common)?;
            commands::multistep(&r, &model_path(&r, m))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(Env::new().filter_or("KOOPMAN_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("koopman: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
