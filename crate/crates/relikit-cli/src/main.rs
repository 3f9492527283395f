//! The `relikit` command: generate synthetic fleets, train and evaluate
//! the reliability models, export survival curves and attributions.
//!
//! Exit codes: 0 success (possibly with warnings), 2 usage or
//! configuration error, 3 runtime failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use relikit::Error;

#[derive(Parser)]
#[command(
    name = "relikit",
    version,
    about = "Bayesian Cox-Weibull reliability modeling on interval-censored recertification data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic fleet dataset plus its ground-truth sidecar.
    Generate(commands::GenerateArgs),
    /// Train one model variant; writes a checkpoint and training history.
    Train(commands::TrainArgs),
    /// Evaluate checkpoints on the test split; writes metrics and predictions.
    Evaluate(commands::EvaluateArgs),
    /// Export BMA survival curves for checkpoints over a shared time grid.
    Curves(commands::CurvesArgs),
    /// Monte-Carlo Shapley attributions for a trained checkpoint.
    Explain(commands::ExplainArgs),
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Schema(_)
        | Error::Parse { .. }
        | Error::Validation(_)
        | Error::Config(_)
        | Error::Domain(_)
        | Error::UnknownId(_) => 2,
        Error::SamplerFailure { .. }
        | Error::Undefined(_)
        | Error::Io { .. }
        | Error::Csv { .. }
        | Error::Serde(_) => 3,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Train(args) => commands::train(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Curves(args) => commands::curves(args),
        Command::Explain(args) => commands::explain(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
