//! Run configuration: built-in defaults, then the TOML file, then command-line flags.

use anyhow::{Context, Result};
use lam_core::agent::AgentConfig;
use lam_core::dataflow::PipelineConfig;
use lam_core::oracle::RemoteConfig;
use lam_core::training::TrainingConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt;
use std::path::{Path, PathBuf};

/// Marks errors in configuration or usage, which exit with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Small learning rates and few epochs, sized for a multi-billion-parameter model.
    Large,
    /// Settings sized for the linear toy policy.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub provider: Provider,
    pub remote: RemoteConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { provider: Provider::Mock, remote: RemoteConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineConfig {
    /// Measure step latency with the wall clock instead of a fixed duration.
    pub wall_clock: bool,
    /// Seconds charged per step when the wall clock is off.
    pub fixed_step_seconds: f64,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self { wall_clock: false, fixed_step_seconds: 1.0 }
    }
}

/// Everything a command may read. `training` holds overrides on top of the chosen profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub workspace: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub oracle: OracleConfig,
    pub pipeline: PipelineConfig,
    pub profile: Profile,
    pub training: toml::Table,
    pub agent: AgentConfig,
    pub online: OnlineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            workspace: PathBuf::from("."),
            seed: 0,
            workers: 6,
            oracle: OracleConfig::default(),
            pipeline: PipelineConfig::default(),
            profile: Profile::Desk,
            training: toml::Table::new(),
            agent: AgentConfig::default(),
            online: OnlineConfig::default(),
        }
    }
}

/// Flags that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub workspace: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub provider: Option<Provider>,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Reads `path`, or `lam.toml` in the workspace when no path is given and it exists.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let workspace = overrides.workspace.clone().unwrap_or_else(|| PathBuf::from("."));
        let candidate = path.map(Path::to_path_buf).unwrap_or_else(|| workspace.join("lam.toml"));
        let mut cfg = if path.is_some() || candidate.exists() {
            let text = std::fs::read_to_string(&candidate)
                .map_err(|e| config_error(format!("cannot read config {}: {e}", candidate.display())))?;
            toml::from_str(&text).map_err(|e| config_error(format!("invalid config {}: {e}", candidate.display())))?
        } else {
            RunConfig::default()
        };
        if let Some(w) = &overrides.workspace {
            cfg.workspace = w.clone();
        }
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(w) = overrides.workers {
            cfg.workers = w;
        }
        if let Some(p) = overrides.provider {
            cfg.oracle.provider = p;
        }
        if cfg.workers == 0 {
            return Err(config_error("workers must be at least 1"));
        }
        cfg.training_config()?;
        Ok(cfg)
    }

    /// The profile's settings with the `training` table laid over them; the run seed wins.
    pub fn training_config(&self) -> Result<TrainingConfig> {
        let base = match self.profile {
            Profile::Large => TrainingConfig::default(),
            Profile::Desk => TrainingConfig::desk_scale(self.seed),
        };
        let mut value = serde_json::to_value(&base).context("serialize training defaults")?;
        let over = serde_json::to_value(&self.training).context("read training table")?;
        merge(&mut value, over);
        let mut cfg: TrainingConfig =
            serde_json::from_value(value).map_err(|e| config_error(format!("invalid [training] table: {e}")))?;
        cfg.seed = self.seed;
        cfg.sft.validate().map_err(|e| config_error(e.to_string()))?;
        cfg.ppo.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(cfg)
    }
}
