//! Run configuration shared by every command, filled from flags and an
//! optional JSON file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Generate,
    Learn,
    Evaluate,
    Cluster,
    Validate,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Generate => "generate",
            Mode::Learn => "learn",
            Mode::Evaluate => "evaluate",
            Mode::Cluster => "cluster",
            Mode::Validate => "validate",
            Mode::Sweep => "sweep",
        }
    }
}

/// Every knob a command may read. Unset fields fall back to per-command
/// defaults or are reported as missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,

    /// JSON file with the same fields; its values take precedence over flags.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Dataset file (JSON Lines).
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Ground-truth mixture file.
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Model file (learned or true mixture).
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Input mixture for `generate` and `sweep`; a random one is drawn when absent.
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixture: Option<PathBuf>,
    /// Report prefix: `<prefix>.csv` and `<prefix>.json`.
    #[arg(long, value_name = "PREFIX")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Manifest path for `learn` (default `<model>.manifest.json`).
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,

    /// Number of components.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// State dimension.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Output dimension (random generation only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Input dimension (random generation only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    /// Observability / controllability horizon.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    /// Trajectory length.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    /// Number of trajectories.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
    /// Condition-number bound.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Smallest allowed weight.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_min: Option<f64>,
    /// Joint nondegeneracy bound.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Comma-separated trajectory counts for `sweep`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    /// Number of seeds per grid point in `sweep`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    /// Rewrite models with square `C` into the `C = I` basis before clustering.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fully_observed: Option<bool>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($field:ident),+) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )+
    };
}

impl RunConfig {
    /// Applies the `--config` file, if any, on top of the flags.
    pub fn resolve(mut self, mode: Mode) -> CliResult<RunConfig> {
        if let Some(path) = self.config.take() {
            let file = load_config_file(&path)?;
            if let Some(file_mode) = file.mode {
                if file_mode != mode {
                    return Err(CliError::usage(format!(
                        "config file is for mode {}, command is {}",
                        file_mode.name(),
                        mode.name()
                    )));
                }
            }
            overlay!(
                self, file, dataset, truth, model, mixture, output, manifest, k, n, m, p, s, length,
                trajectories, seed, noise_scale, kappa, w_min, gamma, grid, seeds, fully_observed
            );
        }
        self.mode = Some(mode);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> CliResult<()> {
        let counts = [
            ("k", self.k),
            ("n", self.n),
            ("m", self.m),
            ("p", self.p),
            ("s", self.s),
            ("length", self.length),
            ("trajectories", self.trajectories),
            ("seeds", self.seeds),
        ];
        for (name, value) in counts {
            if value == Some(0) {
                return Err(CliError::usage(format!("--{name} must be positive")));
            }
        }
        if let Some(grid) = &self.grid {
            if grid.contains(&0) {
                return Err(CliError::usage("--grid entries must be positive"));
            }
        }
        if let Some(scale) = self.noise_scale {
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(CliError::usage("--noise-scale must be a finite non-negative number"));
            }
        }
        if matches!(self.mode, Some(Mode::Learn) | Some(Mode::Sweep)) {
            if let (Some(len), Some(s)) = (self.length, self.s) {
                if len < min_length(s) {
                    return Err(CliError::usage(format!(
                        "--length {len} is below 6(s+1) = {} for s = {s}",
                        min_length(s)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn s_or_default(&self) -> usize {
        self.s.unwrap_or(2)
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale.unwrap_or(1.0)
    }

    pub fn require_path<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
        value.as_deref().ok_or_else(|| CliError::missing(flag))
    }

    pub fn require<T: Copy>(&self, value: Option<T>, flag: &str) -> CliResult<T> {
        value.ok_or_else(|| CliError::missing(flag))
    }
}

/// Shortest trajectory the learner is configured for, `6(s + 1)`.
pub fn min_length(s: usize) -> usize {
    6 * (s + 1)
}

fn load_config_file(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError {
        kind: crate::error::ExitKind::Usage,
        code: "bad_config".into(),
        message: format!("{}: {e}", path.display()),
    })
}
