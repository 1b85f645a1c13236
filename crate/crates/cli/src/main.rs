use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, ValueEnum};
use lfoeq_cli::commands::{self, Context};
use lfoeq_cli::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Expert,
    Imitate,
    Ablate,
    Analyze,
    TabularVerify,
    Report,
}

/// Learning-from-observation equivalence experiments.
#[derive(Debug, Parser)]
#[command(name = "lfoeq", version)]
struct Cli {
    command: Command,
    /// Config file of key=value lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Extra key=value overrides, applied after the file.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output root (default: $LFOEQ_OUT or ./runs).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(short, long, default_value_t = 1)]
    workers: usize,
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_overrides(&cli.set)?;
    let root = cli
        .out
        .or_else(|| std::env::var_os("LFOEQ_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    let ctx = Context { root, cfg };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.workers.max(1)).build()?;
    pool.install(|| match cli.command {
        Command::Expert => commands::expert(&ctx),
        Command::Imitate => commands::imitate(&ctx),
        Command::Ablate => commands::ablate(&ctx),
        Command::Analyze => commands::analyze(&ctx),
        Command::TabularVerify => commands::tabular_verify(&ctx),
        Command::Report => commands::report(&ctx),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            for line in format!("{e:#}").lines() {
                eprintln!("error: {line}");
            }
            ExitCode::FAILURE
        }
    }
}
