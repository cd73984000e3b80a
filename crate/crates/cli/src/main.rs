//! `posegail`: synthetic data, two-stage training, prediction and evaluation.

mod eval;
mod gen;
mod predict;
mod train;
mod util;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use posegail::Error;

#[derive(Parser, Debug)]
#[command(
    name = "posegail",
    version,
    about = "Pose forecasting by imitation learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic sinusoid dataset.
    Gen(gen::GenArgs),
    /// Behavioral cloning, adversarial imitation, or both in sequence.
    Train(train::TrainArgs),
    /// Forecast the frames that follow an input CSV.
    Predict(predict::PredictArgs),
    /// Per-action, per-horizon mean angle error on a test dataset.
    Eval(eval::EvalArgs),
}

/// Exit status for a run aborted because training diverged.
const EXIT_DIVERGED: u8 = 3;

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(a) => gen::run(a),
        Command::Train(a) => train::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Eval(a) => eval::run(a),
    }
}

fn exit_code(e: &anyhow::Error) -> ExitCode {
    match e.downcast_ref::<Error>() {
        Some(Error::Diverged { .. }) => ExitCode::from(EXIT_DIVERGED),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
