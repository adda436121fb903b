//! Config-driven experiments over the mflab core, with reproducible artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

pub mod acceptance;
pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod random;

use artifacts::{config_hash, write_outcome, RunManifest};
use config::{load_config, ExperimentName, Overrides, Resolved};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Core(#[from] mflab_core::Error),
    #[error("i/o: {0}")]
    Io(String),
    #[error("non-finite value at {0}")]
    NonFinite(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            _ => 1,
        }
    }
}

/// Loads and resolves a config without running anything.
pub fn resolve(experiment: ExperimentName, config_path: &Path, over: &Overrides) -> Result<Resolved, CliError> {
    Resolved::new(experiment, load_config(config_path)?, over)
}

/// Resolves, runs and writes one experiment; returns the output directory and manifest.
pub fn run(
    experiment: ExperimentName,
    config_path: &Path,
    over: &Overrides,
    out: &Path,
) -> Result<(PathBuf, RunManifest), CliError> {
    let resolved = resolve(experiment, config_path, over)?;
    let mut hashed = resolved.config.clone();
    hashed.params.cap_states = Some(resolved.cap_states());
    let hash = config_hash(&hashed)?;
    let start = Instant::now();
    let outcome = experiments::run_experiment(&resolved)?;
    write_outcome(out, experiment.as_str(), &hash, &outcome, start.elapsed().as_secs_f64())
}
