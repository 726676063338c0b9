//! `ramanquant` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

/// Bayesian quantification of Raman mixture spectra.
#[derive(Debug, Parser)]
#[command(name = "ramanquant", version, about)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Median, smooth, crop and background-correct a stack of repeats.
    Preprocess(PreprocessArgs),
    /// Learn the target line shape from a pure reference spectrum.
    FitReference(FitReferenceArgs),
    /// Estimate the target concentration in mixture spectra.
    Quantify(QuantifyArgs),
    /// Run the error grid and the regression comparison.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scenario {
    /// Reference plus mixtures under the standard simulation protocol.
    Mixtures,
    /// Daily culture samples with raw repeats, spikes and a water background.
    Glucose,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Protocol (or scenario) JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of mixtures.
    #[arg(long, default_value_t = 100)]
    mixtures: usize,
    #[arg(long, value_enum, default_value_t = Scenario::Mixtures)]
    scenario: Scenario,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// CSV with a wavenumber column and one column per repeat.
    #[arg(long)]
    input: PathBuf,
    /// Processed single-spectrum CSV.
    #[arg(long)]
    out: PathBuf,
    /// Background spectrum to subtract (repeats are median-combined).
    #[arg(long)]
    background: Option<PathBuf>,
    /// Pipeline parameters JSON.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitReferenceArgs {
    /// Reference spectrum CSV.
    #[arg(long)]
    reference: PathBuf,
    /// Concentration of the target in the reference.
    #[arg(long, allow_negative_numbers = true)]
    c_pure: f64,
    /// Target model JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Model configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the chain trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct QuantifyArgs {
    /// Target model written by `fit-reference`.
    #[arg(long)]
    model: PathBuf,
    /// Output directory for per-mixture results and `summary.csv`.
    #[arg(long)]
    out: PathBuf,
    /// Mixture spectrum CSVs.
    mixtures: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs per mixture; the summary reports their mean and SEM.
    #[arg(long, default_value_t = 1)]
    runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Study {
    All,
    Grid,
    Comparison,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long)]
    out: PathBuf,
    /// JSON with optional `grid` and `comparison` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// 1000 mixtures per grid cell and 100 comparison datasets.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long, value_enum, default_value_t = Study::All)]
    study: Study,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RAMANQUANT_LOG", "warn")).init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &argv),
        Command::Preprocess(a) => commands::preprocess(a, &argv),
        Command::FitReference(a) => commands::fit_reference(a, &argv),
        Command::Quantify(a) => commands::quantify(a, cli.jobs, &argv),
        Command::Benchmark(a) => commands::benchmark(a, cli.jobs, &argv),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            commands::exit_code(&e)
        }
    }
}
