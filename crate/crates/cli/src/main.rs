use anyhow::Result;
use clap::{Parser, Subcommand};

use moofs_cli::{
    cmd_evaluate, cmd_preprocess, cmd_report, cmd_select, EvaluateArgs, PreprocessArgs, ReportArgs,
    SelectArgs,
};

/// Unsupervised multi-objective feature selection for intrusion-detection data.
#[derive(Parser)]
#[command(name = "moofs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode raw records into a run directory.
    Preprocess(PreprocessArgs),
    /// Evolve a Pareto front of feature subsets (labels are not used).
    Select(SelectArgs),
    /// Cross-validate every subset of a front with a classifier.
    Evaluate(EvaluateArgs),
    /// Write the text summary and scatter data for a run directory.
    Report(ReportArgs),
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Preprocess(args) => cmd_preprocess(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Report(args) => cmd_report(&args),
    }
}
