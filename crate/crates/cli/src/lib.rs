//! Command-line driver: JSON experiment configs in, CSV tables and a JSON
//! summary out.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod protocols;

use std::path::PathBuf;

use config::{parse_config, ExperimentConfig, Overrides};
use error::{CliError, Result};
use output::{write_artifacts, Artifacts};

/// Parses `text` and checks that it holds the protocol `kind` (any protocol
/// when `None`).
pub fn load(kind: Option<&str>, text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let cfg = parse_config(text, overrides)?;
    if let Some(kind) = kind {
        if cfg.protocol.name() != kind {
            return Err(CliError::config(
                "protocol",
                format!(
                    "config describes a `{}` run but the subcommand is `{kind}`",
                    cfg.protocol.name()
                ),
            ));
        }
    }
    Ok(cfg)
}

pub fn load_preset(name: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = presets::preset(name).ok_or_else(|| {
        CliError::config(
            "preset",
            format!(
                "unknown preset `{name}`; available: {}",
                presets::NAMES.join(", ")
            ),
        )
    })?;
    load(None, &text, overrides)
}

/// Runs the experiment and writes its artifacts. A contract violation is
/// reported after the artifacts are on disk.
pub fn execute(config: &ExperimentConfig) -> Result<(PathBuf, Artifacts)> {
    let dir = config
        .output
        .dir
        .clone()
        .unwrap_or_else(|| config::DEFAULT_OUT_DIR.into());
    let artifacts = protocols::run(config)?;
    write_artifacts(&dir, &artifacts)?;
    protocols::check_contract(&artifacts)?;
    Ok((dir, artifacts))
}
