//! Configuration documents: `[environment]`, `[channel]`, `[render]` and an
//! optional `[language]` lexicon section, in TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelConfig, ChannelError};
use crate::episode::{EpisodeConfig, EpisodeError};
use crate::language::{LanguageError, Lexicon, LexiconConfig};
use crate::render::MIN_CELL_PX;
use crate::trace::config_digest;

pub const SEED_ENV: &str = "GRIDCOMM_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub cell_px: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { cell_px: 30 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub environment: EpisodeConfig,
    pub channel: ChannelConfig,
    pub render: RenderConfig,
    pub language: LexiconConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{SEED_ENV}={0} is not an unsigned integer")]
    BadSeedEnv(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Language(#[from] LanguageError),
    #[error("render cell_px must be at least {MIN_CELL_PX}")]
    Render,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: FileConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.environment.validate()?;
        self.channel.validate()?;
        Lexicon::from_config(&self.language)?;
        if self.render.cell_px < MIN_CELL_PX {
            return Err(ConfigError::Render);
        }
        Ok(())
    }

    pub fn lexicon(&self) -> Result<Lexicon, ConfigError> {
        Ok(Lexicon::from_config(&self.language)?)
    }

    /// Replaces the environment seed with `GRIDCOMM_SEED` when it is set.
    pub fn apply_seed_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.environment.seed = raw.trim().parse().map_err(|_| ConfigError::BadSeedEnv(raw))?;
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        config_digest(self)
    }
}
