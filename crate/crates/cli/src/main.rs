//! `eml`: build, annotate, sample, decode and analyse magic-state injection
//! experiments described by a JSON config.

mod commands;
mod config;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::fail::CliError;

#[derive(Parser, Debug)]
#[command(name = "eml", version, about = "Magic-state injection with erasure qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Input file for `decode` and `annotate`.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Leave out the timestamp comment at the top of CSV output.
    #[arg(long, global = true)]
    no_header_timestamp: bool,
    /// Worker threads; falls back to `EML_THREADS`.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Write the noiseless circuit.
    Build,
    /// Write the circuit with noise and erasure checks.
    Annotate,
    /// Sample shot records as CSV.
    Sample,
    /// Decode sampled records.
    Decode,
    /// Run one post-selected experiment and print a CSV row.
    Run,
    /// Run every `(d1, r)` in the config and mark Pareto-optimal points.
    Sweep,
    /// Enumerate single faults and report coefficients.
    Enumerate,
    /// Fit the scaling ansatz to `(x, d, p_L)` points.
    Fit,
}

pub struct Options {
    pub seed: u64,
    pub shots: u64,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub timestamp: bool,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("EML_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::field("EML_THREADS", format!("expected a thread count, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = threads(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new("threads", e.to_string()))?;
    }
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => return Err(CliError::field("config", "--config is required")),
    };
    let opts = Options {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        shots: cli.shots.or(cfg.shots).unwrap_or(10_000),
        out: cli.out.clone().or_else(|| cfg.out.clone()),
        input: cli.input.clone().or_else(|| cfg.input.clone()),
        timestamp: !cli.no_header_timestamp,
    };
    let text = match cli.command {
        Command::Build => commands::build(&cfg)?,
        Command::Annotate => commands::annotate(&cfg, &opts)?,
        Command::Sample => commands::sample(&cfg, &opts)?,
        Command::Decode => commands::decode(&cfg, &opts)?,
        Command::Run => commands::run(&cfg, &opts)?,
        Command::Sweep => commands::sweep(&cfg, &opts)?,
        Command::Enumerate => commands::enumerate(&cfg)?,
        Command::Fit => commands::fit(&cfg)?,
    };
    commands::emit(&opts, &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::new("usage", e.to_string().trim_end()).to_json());
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
