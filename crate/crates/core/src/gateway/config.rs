use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::PinMap;
use crate::daq::AcquisitionConfig;
use crate::plant::PlantConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Simulation time paced to wall time.
    Realtime,
    /// Unpaced; time only advances while a program runs.
    #[default]
    Fast,
}

impl std::str::FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "realtime" => Ok(ClockMode::Realtime),
            "fast" => Ok(ClockMode::Fast),
            other => Err(format!("unknown clock mode '{other}' (realtime|fast)")),
        }
    }
}

/// Power rails of the physical rig. Informational only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerMetadata {
    pub mains: String,
    pub dc_rail: String,
}

impl Default for PowerMetadata {
    fn default() -> Self {
        Self {
            mains: "110V 50Hz".into(),
            dc_rail: "24V".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RigConfig {
    pub plant: PlantConfig,
    pub acquisition: AcquisitionConfig,
    pub pin_map: PinMap,
    pub clock_mode: ClockMode,
    pub metadata: PowerMetadata,
}

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
}

impl RigConfig {
    /// Parses a rig file: plant keys flat at top level, plus optional
    /// `clock = "realtime"|"fast"` and `[acquisition]` / `[metadata]` tables.
    ///
    /// ```toml
    /// supply_gauge = 700
    /// seed = 42
    /// clock = "fast"
    ///
    /// [acquisition]
    /// csv_path = "run.csv"
    /// sample_rate = 1000
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigFileError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigFileError::Parse(e.message().to_string()))?;
        let mut config = RigConfig::default();
        if let Some(value) = table.remove("acquisition") {
            config.acquisition = value
                .try_into()
                .map_err(|e: toml::de::Error| ConfigFileError::Parse(format!("[acquisition]: {}", e.message())))?;
        }
        if let Some(value) = table.remove("metadata") {
            config.metadata = value
                .try_into()
                .map_err(|e: toml::de::Error| ConfigFileError::Parse(format!("[metadata]: {}", e.message())))?;
        }
        if let Some(value) = table.remove("clock") {
            let name = value
                .as_str()
                .ok_or_else(|| ConfigFileError::Parse("clock must be a string".into()))?;
            config.clock_mode = name.parse().map_err(ConfigFileError::Parse)?;
        }
        config.plant = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigFileError::Parse(e.message().to_string()))?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}
