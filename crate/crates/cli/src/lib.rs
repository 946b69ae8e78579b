//! Command-line driver for `ldslab`: synthetic data generation, learning,
//! evaluation against ground truth, clustering, validation and sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

use clap::{Parser, Subcommand};

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ldslab", version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("LDSLAB_GIT_REV"), ")"))]
#[command(about = "Learn mixtures of linear dynamical systems from short trajectories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a dataset (and its ground-truth mixture).
    Generate(RunConfig),
    /// Learn a mixture from a dataset.
    Learn(RunConfig),
    /// Compare a learned model to the ground truth.
    Evaluate(RunConfig),
    /// Posterior component probabilities for every trajectory.
    Cluster(RunConfig),
    /// Check the well-behavedness conditions for a mixture.
    Validate(RunConfig),
    /// Error versus number of trajectories.
    Sweep(RunConfig),
}

impl Command {
    pub fn split(self) -> (Mode, RunConfig) {
        match self {
            Command::Generate(c) => (Mode::Generate, c),
            Command::Learn(c) => (Mode::Learn, c),
            Command::Evaluate(c) => (Mode::Evaluate, c),
            Command::Cluster(c) => (Mode::Cluster, c),
            Command::Validate(c) => (Mode::Validate, c),
            Command::Sweep(c) => (Mode::Sweep, c),
        }
    }
}

/// Caps the global worker pool from `LDSLAB_THREADS` when it is set.
pub fn configure_threads(value: Option<&str>) -> CliResult<()> {
    let Some(raw) = value else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::usage(format!("LDSLAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure worker threads: {e}")))
}

pub fn run(command: Command) -> CliResult<String> {
    let (mode, cfg) = command.split();
    let cfg = cfg.resolve(mode)?;
    match mode {
        Mode::Generate => commands::cmd_generate(&cfg),
        Mode::Learn => commands::cmd_learn(&cfg),
        Mode::Evaluate => commands::cmd_evaluate(&cfg),
        Mode::Cluster => commands::cmd_cluster(&cfg),
        Mode::Validate => commands::cmd_validate(&cfg),
        Mode::Sweep => commands::cmd_sweep(&cfg),
    }
}
