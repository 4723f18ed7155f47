//! Config-driven experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod setup;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::commands::Context;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "nmqsd", version, about = "Non-Markovian quantum state diffusion experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for trajectory ensembles.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Base seed; overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Emit the master-equation and SSE coefficients (or the RWA amplitude).
    Coeffs,
    /// Sample noise paths and report their second moments.
    NoiseCheck,
    /// Run a trajectory ensemble.
    Trajectories,
    /// Integrate the master equation.
    Master,
    /// Propagate the full system and few-mode bath.
    Oracle,
    /// Trace distances between series listed in `run.compare`.
    Compare,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::parse(text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if cli.workers == Some(0) {
        return Err(CliError::Validation("--workers must be >= 1".into()));
    }
    let workers = cli
        .workers
        .or(cfg.run.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    std::fs::create_dir_all(&out)?;
    let ctx = Context {
        seed: cli.seed.unwrap_or(cfg.run.seed),
        config_hash: hex::encode(Sha256::digest(&bytes)),
        cfg,
        workers,
        out,
    };
    match cli.command {
        Command::Coeffs => commands::coeffs(&ctx),
        Command::NoiseCheck => commands::noise_check(&ctx),
        Command::Trajectories => commands::trajectories(&ctx),
        Command::Master => commands::master(&ctx),
        Command::Oracle => commands::oracle(&ctx),
        Command::Compare => commands::compare(&ctx),
    }
}
