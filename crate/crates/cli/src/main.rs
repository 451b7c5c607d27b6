//! `kslab` — batch experiment runner for the chemotaxis-logistic
//! laboratory: `run` executes a config, `audit` evaluates every closed form,
//! `compare` diffs two run directories.

mod compare;
mod config;
mod initdata;
mod runner;

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "kslab",
    version,
    about = "Chemotaxis-logistic numerical laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for sweep fan-out (KSLAB_WORKERS overrides).
        #[arg(long)]
        workers: Option<usize>,
        /// Validate the config and exit without running.
        #[arg(long)]
        dry_run: bool,
    },
    /// Evaluate every closed-form constant of a model config.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diff two run directories report by report.
    Compare {
        dir1: PathBuf,
        dir2: PathBuf,
        /// Numeric tolerance for cell comparisons.
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
}

/// Worker count: the environment variable overrides the flag, which
/// overrides the detected parallelism.
fn resolve_workers(flag: Option<usize>) -> usize {
    if let Ok(text) = std::env::var("KSLAB_WORKERS") {
        if let Ok(n) = text.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
        log::warn!("ignoring unparsable KSLAB_WORKERS={text:?}");
    }
    flag.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

fn load_config(path: &PathBuf) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    ExperimentConfig::from_toml_str(&text)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            dry_run,
        } => {
            let cfg = load_config(&config)?;
            if dry_run {
                cfg.validate()?;
                println!("config ok: {} experiment", cfg.kind);
                return Ok(());
            }
            let workers = resolve_workers(workers);
            runner::run_experiment(&cfg, &out, workers)?;
            println!("run complete: {}", out.display());
        }
        Command::Audit { config, out } => {
            let mut cfg = load_config(&config)?;
            cfg.kind = ExperimentKind::OracleAudit;
            runner::run_experiment(&cfg, &out, 1)?;
            println!("audit complete: {}", out.display());
        }
        Command::Compare { dir1, dir2, tol } => {
            let summary = compare::compare_dirs(&dir1, &dir2, tol)?;
            print!("{}", summary.render());
            if !summary.is_empty() {
                std::process::exit(2);
            }
        }
    }
    Ok(())
}
