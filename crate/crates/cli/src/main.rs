//! Batch pipeline for reconciling electricity cost and emissions data:
//! `ingest` validates inputs, `flatten` produces month-hour matrices,
//! `analyze` emits the correlation/categorization/premium tables, and
//! `report` concatenates the human summaries.
//!
//! Exit codes: 0 success, 1 validation failures, 2 fatal errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "gridalign", version, about = "Electricity cost and emissions reconciliation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Key = value configuration file; CLI flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Calendar year fixing month lengths and weekdays.
    #[arg(long, global = true)]
    year: Option<i32>,
    /// Worker pool size for per-file fan-out (0 = library default).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate every configured input; write manifest.csv.
    Ingest,
    /// Write month-hour matrix files per tariff and per signal.
    Flatten,
    /// Emit the analysis CSVs and a text summary.
    Analyze,
    /// Concatenate the manifest and analysis summaries to stdout.
    Report,
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(year) = cli.year {
        config.year = year;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    if let Some(out) = cli.out {
        config.out_dir = Some(out);
    }
    config.validate()?;

    if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build_global()
            .ok();
    }

    match cli.command {
        Command::Ingest => commands::ingest::run(&config),
        Command::Flatten => commands::flatten::run(&config),
        Command::Analyze => commands::analyze::run(&config),
        Command::Report => commands::report::run(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
