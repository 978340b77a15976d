//! Run configuration: TOML file, defaults, validation.

use crate::agent::AgentConfig;
use crate::env::{EpisodeConfig, ProblemVariant};
use crate::error::Error;
use crate::kinematics::Limits;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Episode parameters, without the variant/limits that live at the top
/// level of the run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSettings {
    pub eps_success: f64,
    pub max_steps: u32,
    pub terminal_bonus: f64,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        Self { eps_success: 0.5, max_steps: 200, terminal_bonus: 100.0 }
    }
}

/// Everything a run needs; serializes to a sectioned TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub variant: ProblemVariant,
    pub out_dir: PathBuf,
    pub limits: Limits,
    pub episode: EpisodeSettings,
    pub agent: AgentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            variant: ProblemVariant::P4d,
            out_dir: PathBuf::from("runs"),
            limits: Limits::default(),
            episode: EpisodeSettings::default(),
            agent: AgentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            eps_success: self.episode.eps_success,
            max_steps: self.episode.max_steps,
            terminal_bonus: self.episode.terminal_bonus,
            variant: self.variant,
            limits: self.limits,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.episode_config().validate().map_err(Error::Config)?;
        self.agent.validate().map_err(Error::Config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}
