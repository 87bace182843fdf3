//! Flat TOML experiment files.
//!
//! Every key is optional; missing keys keep the [`ExperimentConfig`]
//! defaults.
//!
//! ```toml
//! antennas = 2
//! group_sizes = [1, 2, 3]
//! schemes = ["SC", "CC", "MC"]
//! modes = ["RS", "NoRS"]
//! snr_db = [0, 5, 10, 15, 20, 25, 30]
//! rc_th = 0.3
//! realizations = 100
//! seed = 0
//! epsilon = 1e-4
//! max_iters = 200
//! alpha_grid = [0.05, 0.1, 0.15]
//! init = "matched-filter"   # or "random"
//! starts = 1
//! warm_start = true
//! ```

use std::fmt;

use rsmulticast_core::ao::InitStrategy;
use rsmulticast_core::model::{Mode, Scheme};
use serde::Deserialize;

use crate::harness::ExperimentConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub antennas: Option<usize>,
    pub group_sizes: Option<Vec<usize>>,
    pub schemes: Option<Vec<String>>,
    pub modes: Option<Vec<String>>,
    pub snr_db: Option<Vec<f64>>,
    pub rc_th: Option<f64>,
    pub realizations: Option<usize>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
    pub alpha_grid: Option<Vec<f64>>,
    pub init: Option<String>,
    pub starts: Option<usize>,
    pub warm_start: Option<bool>,
}

#[derive(Debug)]
pub enum ConfigError {
    Toml(toml::de::Error),
    UnknownScheme(String),
    UnknownMode(String),
    UnknownInit(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Toml(e) => write!(f, "{e}"),
            ConfigError::UnknownScheme(s) => write!(f, "unknown scheme `{s}` (expected SC, CC or MC)"),
            ConfigError::UnknownMode(s) => write!(f, "unknown mode `{s}` (expected RS or NoRS)"),
            ConfigError::UnknownInit(s) => write!(f, "unknown init `{s}` (expected matched-filter or random)"),
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_schemes<S: AsRef<str>>(names: &[S]) -> Result<Vec<Scheme>, ConfigError> {
    names
        .iter()
        .map(|s| Scheme::parse(s.as_ref()).ok_or_else(|| ConfigError::UnknownScheme(s.as_ref().to_string())))
        .collect()
}

pub fn parse_modes<S: AsRef<str>>(names: &[S]) -> Result<Vec<Mode>, ConfigError> {
    names
        .iter()
        .map(|s| Mode::parse(s.as_ref()).ok_or_else(|| ConfigError::UnknownMode(s.as_ref().to_string())))
        .collect()
}

pub fn parse_init(name: &str) -> Result<InitStrategy, ConfigError> {
    match name {
        "matched-filter" => Ok(InitStrategy::MatchedFilter),
        "random" => Ok(InitStrategy::SeededRandom),
        other => Err(ConfigError::UnknownInit(other.to_string())),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(ConfigError::Toml)
    }

    /// Overwrites the fields of `config` that this file sets.
    pub fn apply(&self, config: &mut ExperimentConfig) -> Result<(), ConfigError> {
        if let Some(v) = self.antennas {
            config.antennas = v;
        }
        if let Some(v) = &self.group_sizes {
            config.group_sizes = v.clone();
        }
        if let Some(v) = &self.schemes {
            config.schemes = parse_schemes(v)?;
        }
        if let Some(v) = &self.modes {
            config.modes = parse_modes(v)?;
        }
        if let Some(v) = &self.snr_db {
            config.snr_grid_db = v.clone();
        }
        if let Some(v) = self.rc_th {
            config.common_threshold = v;
        }
        if let Some(v) = self.realizations {
            config.realizations = v;
        }
        if let Some(v) = self.seed {
            config.master_seed = v;
        }
        if let Some(v) = self.epsilon {
            config.ao.epsilon = v;
        }
        if let Some(v) = self.max_iters {
            config.ao.max_iters = v;
        }
        if let Some(v) = &self.alpha_grid {
            config.ao.alpha_grid = v.clone();
        }
        if let Some(v) = &self.init {
            config.ao.init = parse_init(v)?;
        }
        if let Some(v) = self.starts {
            config.ao.starts = v;
        }
        if let Some(v) = self.warm_start {
            config.warm_start = v;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_keeps_defaults() {
        let mut config = ExperimentConfig::default();
        ConfigFile::parse("").unwrap().apply(&mut config).unwrap();
        assert_eq!(config, ExperimentConfig::default());
    }

    #[test]
    fn keys_override() {
        let text = "antennas = 6\nschemes = [\"MC\"]\nmodes = [\"NoRS\"]\nsnr_db = [10]\nrc_th = 0.5\ninit = \"random\"\n";
        let mut config = ExperimentConfig::default();
        ConfigFile::parse(text).unwrap().apply(&mut config).unwrap();
        assert_eq!(config.antennas, 6);
        assert_eq!(config.schemes, vec![Scheme::Mc]);
        assert_eq!(config.modes, vec![Mode::NoRs]);
        assert_eq!(config.snr_grid_db, vec![10.0]);
        assert_eq!(config.common_threshold, 0.5);
        assert_eq!(config.ao.init, InitStrategy::SeededRandom);
    }

    #[test]
    fn rejects_unknown_keys_and_names() {
        assert!(ConfigFile::parse("antenas = 2").is_err());
        let file = ConfigFile::parse("schemes = [\"XC\"]").unwrap();
        assert!(matches!(
            file.apply(&mut ExperimentConfig::default()),
            Err(ConfigError::UnknownScheme(_))
        ));
    }
}
