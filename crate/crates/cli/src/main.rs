//! Command-line front end: synthesize a corpus, train either model, run
//! inference, evaluate predictions and rank critic differences.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::exit::exit_code;

#[derive(Debug, Parser)]
#[command(
    name = "precip-sr",
    version,
    about = "Super-resolution of gridded precipitation fields"
)]
struct Cli {
    /// Random seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic HR corpus with a manifest.
    Synth,
    /// Train the SRCNN baseline or the WGAN.
    Train(commands::train::TrainArgs),
    /// Apply a trained generator to LR fields.
    Infer(commands::infer::InferArgs),
    /// Block-average a corpus split into LR field files.
    Coarsen(commands::coarsen::CoarsenArgs),
    /// Compare predictions with the reference fields.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// List the cases with the largest critic differences.
    Rank(commands::rank::RankArgs),
}

/// Options every command shares.
#[derive(Debug, Clone)]
pub struct Global {
    pub seed: Option<u64>,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let global = Global {
        seed: cli.seed,
        config: cli.config,
        out: cli.out,
        overrides: cli.overrides,
    };
    let result = match cli.command {
        Command::Synth => commands::synth::run(&global),
        Command::Train(a) => commands::train::run(&global, &a),
        Command::Infer(a) => commands::infer::run(&global, &a),
        Command::Coarsen(a) => commands::coarsen::run(&global, &a),
        Command::Evaluate(a) => commands::evaluate::run(&global, &a),
        Command::Rank(a) => commands::rank::run(&global, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg: Vec<String> = e
                .chain()
                .map(|c| c.to_string())
                .filter(|m| !m.is_empty())
                .collect();
            eprintln!("error: {}", msg.join(": "));
            ExitCode::from(exit_code(&e))
        }
    }
}
