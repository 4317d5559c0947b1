//! `hipgest`: decomposition studies, autoencoder and generator training,
//! gesture generation, evaluation and beat extraction.

mod beats;
mod config;
mod data;
mod decompose;
mod error;
mod eval;
mod generate;
mod manifest;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;

#[derive(Parser, Debug)]
#[command(name = "hipgest", version, about)]
struct Cli {
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug)]
pub struct Common {
    /// Config file of `key = value` lines (`#` comments).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Random seed; overrides the `seed` key.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split one joint coordinate into periodic and non-periodic parts.
    Decompose(decompose::DecomposeArgs),
    /// Train the periodic autoencoder.
    TrainPae(train::TrainPaeArgs),
    /// Train the hierarchical gesture generator.
    TrainHier(train::TrainHierArgs),
    /// Generate body, hand and face motion from conditioning.
    Generate(generate::GenerateArgs),
    /// Score generated motion against ground truth.
    Eval(eval::EvalArgs),
    /// Extract beats from audio or motion.
    Beats(beats::BeatsArgs),
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Decompose(a) => decompose::run(a),
        Command::TrainPae(a) => train::run_pae(a),
        Command::TrainHier(a) => train::run_hier(a),
        Command::Generate(a) => generate::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Beats(a) => beats::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet {
            log::LevelFilter::Warn
        } else {
            log::LevelFilter::Info
        })
        .format_timestamp(None)
        .init();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
