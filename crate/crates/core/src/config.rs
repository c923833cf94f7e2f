//! The JSON configuration file shared by the edge, the avatar and demos.
//!
//! Every section is optional. Relative paths are resolved against the
//! directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::avatar::{AvatarConfig, KinematicParams, OdomNoise, StartPose};
use crate::edge::{ArbiterParams, EdgeConfig};
use crate::nav::NavParams;
use crate::proto::ArqConfig;
use crate::transport::Impairment;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid value at `{key}`: {message}")]
    Parse { path: PathBuf, key: String, message: String },
    #[error("invalid value at `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    /// Dotted path of the offending key, when known.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Io { .. } => None,
            ConfigError::Parse { key, .. } | ConfigError::Invalid { key, .. } => Some(key),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    #[default]
    Virtual,
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ListenConfig {
    pub http: String,
    pub proto: String,
}

impl Default for ListenConfig {
    fn default() -> Self {
        Self { http: "127.0.0.1:8080".into(), proto: "127.0.0.1:9000".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeSection {
    pub odom_relay_interval_ms: u64,
    pub history_limit: usize,
}

impl Default for EdgeSection {
    fn default() -> Self {
        let d = EdgeConfig::default();
        Self { odom_relay_interval_ms: d.odom_relay_interval_ms, history_limit: d.history_limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvatarSection {
    pub kinematics: KinematicParams,
    pub start: StartPose,
    pub odom_noise: Option<OdomNoise>,
    pub speaker_interval_ms: u64,
    pub speaker_script: Option<PathBuf>,
    /// Edge protocol address for `telavatar avatar`.
    pub edge: Option<String>,
}

impl Default for AvatarSection {
    fn default() -> Self {
        let d = AvatarConfig::default();
        Self {
            kinematics: d.kinematics,
            start: d.start,
            odom_noise: d.odom_noise,
            speaker_interval_ms: d.speaker_interval_ms,
            speaker_script: None,
            edge: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub map: Option<PathBuf>,
    pub listen: ListenConfig,
    pub protocol: ArqConfig,
    pub nav: NavParams,
    pub arbiter: ArbiterParams,
    pub edge: EdgeSection,
    pub avatar: AvatarSection,
    pub impairment: Impairment,
    pub clock: Clock,
    pub seed: u64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SystemConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, path, base)
    }

    /// Parses `text` (named `origin` in diagnostics) and validates it.
    pub fn parse(text: &str, origin: &Path, base_dir: PathBuf) -> Result<Self, ConfigError> {
        let mut config: Self = parse_json(text, origin)?;
        config.base_dir = base_dir;
        config.validate()?;
        Ok(config)
    }

    pub fn from_value(value: serde_json::Value, origin: &Path, base_dir: PathBuf) -> Result<Self, ConfigError> {
        let mut config: Self = serde_path_to_error::deserialize(value).map_err(|e| parse_error(e, origin))?;
        config.base_dir = base_dir;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, message: String| ConfigError::Invalid { key: key.into(), message };
        self.protocol.validate().map_err(|m| invalid("protocol", m))?;
        self.nav.validate().map_err(|m| invalid("nav", m))?;
        self.arbiter.validate().map_err(|m| invalid("arbiter", m))?;
        self.impairment.validate().map_err(|m| invalid("impairment", m))?;
        if self.edge.history_limit == 0 {
            return Err(invalid("edge.history_limit", "must be > 0".into()));
        }
        self.avatar_config().validate().map_err(|m| invalid("avatar", m))?;
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn map_path(&self) -> Result<PathBuf, ConfigError> {
        self.map
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| ConfigError::Invalid { key: "map".into(), message: "a map file is required".into() })
    }

    pub fn read_map(&self) -> Result<String, ConfigError> {
        let path = self.map_path()?;
        std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path, source })
    }

    pub fn speaker_script_path(&self) -> Option<PathBuf> {
        self.avatar.speaker_script.as_deref().map(|p| self.resolve(p))
    }

    pub fn edge_config(&self) -> EdgeConfig {
        EdgeConfig {
            protocol: self.protocol.clone(),
            nav: self.nav.clone(),
            arbiter: self.arbiter.clone(),
            odom_relay_interval_ms: self.edge.odom_relay_interval_ms,
            history_limit: self.edge.history_limit,
        }
    }

    pub fn avatar_config(&self) -> AvatarConfig {
        AvatarConfig {
            protocol: self.protocol.clone(),
            kinematics: self.avatar.kinematics.clone(),
            start: self.avatar.start.clone(),
            odom_noise: self.avatar.odom_noise,
            speaker_interval_ms: self.avatar.speaker_interval_ms,
        }
    }
}

/// Deserializes JSON text, reporting the dotted key path on failure.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| parse_error(e, origin))
}

fn parse_error<E: std::fmt::Display>(e: serde_path_to_error::Error<E>, origin: &Path) -> ConfigError {
    let key = e.path().to_string();
    ConfigError::Parse { path: origin.to_path_buf(), key, message: e.inner().to_string() }
}
