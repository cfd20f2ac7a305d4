//! Versioned TOML configuration.

use std::path::Path;

use conjunct_core::encoder::{EncoderSpec, FlagEncoding, HashedConfig};
use conjunct_core::models::TrainConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("unsupported config version {found} (expected {CONFIG_VERSION})")]
    Version { found: u32 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub flags: FlagEncoding,
}

/// ```toml
/// version = 1
///
/// [encoder.hashed]
/// dim = 4096
/// window = 2
///
/// [detector]
/// flags = "binary"
///
/// [train]
/// epochs = 30
/// seed = 13
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default = "default_encoder")]
    pub encoder: EncoderSpec,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_encoder() -> EncoderSpec {
    EncoderSpec::Hashed(HashedConfig::default())
}

impl Default for Config {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            encoder: default_encoder(),
            detector: DetectorConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_string(),
            source,
        })?;
        if cfg.version != CONFIG_VERSION {
            return Err(ConfigError::Version { found: cfg.version });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: p.clone(),
            source,
        })?;
        Self::parse(&text, &p)
    }
}
