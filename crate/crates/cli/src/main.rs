//! `blast`: compress dense matrices into BLAST factors, inspect and benchmark
//! the result, and rerun the synthetic convergence experiments.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors (including
//! unreadable or malformed files), 3 when factorization diverges.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "blast", version, about = "BLAST structured-matrix compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Factorize a dense .npy matrix into a BLAST container.
    Compress(CompressArgs),
    /// Write the dense form of a BLAST container as .npy.
    Reconstruct(ReconstructArgs),
    /// Print shape, parameter and FLOP counts of a container as JSON.
    Info(InfoArgs),
    /// Time structured against dense batched products.
    Bench(BenchArgs),
    /// Run the GD vs PrecGD convergence experiment on synthetic targets.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Gd,
    Precgd,
}

#[derive(Debug, clap::Args)]
struct CompressArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Number of blocks along each axis.
    #[arg(long)]
    b: usize,
    /// Rank parameter.
    #[arg(long)]
    r: usize,
    #[arg(long, value_enum, default_value = "precgd")]
    method: MethodArg,
    #[arg(long, default_value_t = 300)]
    iters: usize,
    #[arg(long, default_value_t = 0.1)]
    delta0: f64,
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `linear` (1 to 0), `constant:ETA` or `theorem1` (gd only).
    #[arg(long, default_value = "linear")]
    schedule: String,
    /// Optional per-iteration loss curve as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct ReconstructArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, clap::Args)]
struct InfoArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, clap::Args)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Rows of the random input batch.
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Lowrank,
    Blast,
}

#[derive(Debug, clap::Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    experiment: ExperimentArg,
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Rank parameter of the target.
    #[arg(long, default_value_t = 8)]
    rstar: usize,
    #[arg(long, default_value_t = 16)]
    b: usize,
    #[arg(long, default_value_t = 8)]
    r: usize,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Seed of the first run; run k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial step of plain GD, decayed linearly to 0.
    #[arg(long, default_value_t = blast_core::experiment::SynthConfig::DEFAULT_GD_ETA0)]
    gd_eta0: f64,
    /// Initial step of PrecGD, decayed linearly to 0.
    #[arg(long, default_value_t = 1.0)]
    precgd_eta0: f64,
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta0: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compress(args) => commands::compress(args),
        Command::Reconstruct(args) => commands::reconstruct(args),
        Command::Info(args) => commands::info(args),
        Command::Bench(args) => commands::bench(args),
        Command::Synth(args) => commands::synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
