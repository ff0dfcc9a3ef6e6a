//! Acquisition: synchronous sampling of the plant sensors, CSV logging and
//! lossy telemetry fan-out.
//!
//! The sample clock is derived from the simulation step counter, so the
//! sample rate must divide the step rate. Logging and streaming are
//! independent: a slow subscriber loses old batches, the CSV never loses rows.

mod session;
mod stats;
mod telemetry;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use session::{Session, Summary, FLUSH_EVERY_ROWS};
pub use stats::{batch_stats, ChannelStat, ChannelStats};
pub use telemetry::{SampleBatch, Subscription, DEFAULT_BATCH_ROWS, DEFAULT_QUEUE_BATCHES};

#[derive(Debug, Error)]
pub enum DaqError {
    #[error("invalid rate: {rate} Hz does not divide the simulation step rate of {step_rate} Hz")]
    InvalidRate { rate: u32, step_rate: f64 },
    #[error("channel id required for P{0}")]
    MissingChannelId(usize),
    #[error("expected {expected} channel ids, got {got}")]
    ChannelCount { expected: usize, got: usize },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("acquisition session is not active")]
    Inactive,
    #[error("empty window")]
    EmptyWindow,
    #[error("expected {expected} readings per row, got {got}")]
    RowWidth { expected: usize, got: usize },
    #[error("sample time {t} does not advance past {last}")]
    NonMonotonic { t: f64, last: f64 },
}

/// Analog input wiring mode. Recorded only; it has no simulated effect.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalConfig {
    #[default]
    Default,
    Rse,
    Nrse,
    Differential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub csv_path: PathBuf,
    /// Hz.
    pub sample_rate: u32,
    pub terminal_config: TerminalConfig,
    /// Device channel names for P1..Pn, e.g. `dDAQ2Mod2/ai1`.
    pub channel_ids: Vec<String>,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            csv_path: PathBuf::from("rig.csv"),
            sample_rate: 1000,
            terminal_config: TerminalConfig::Default,
            channel_ids: (1..=5).map(|i| format!("dDAQ2Mod2/ai{i}")).collect(),
        }
    }
}

impl AcquisitionConfig {
    /// Checks the configuration against the plant clock and returns the
    /// number of simulation steps per sample.
    pub fn decimation(&self, step_rate: f64, n_channels: usize) -> Result<u64, DaqError> {
        let invalid = DaqError::InvalidRate {
            rate: self.sample_rate,
            step_rate,
        };
        let steps = step_rate.round();
        if self.sample_rate == 0 || !steps.is_finite() || (steps - step_rate).abs() > 1e-6 * steps {
            return Err(invalid);
        }
        let steps = steps as u64;
        let rate = self.sample_rate as u64;
        if rate > steps || !steps.is_multiple_of(rate) {
            return Err(invalid);
        }
        if self.channel_ids.len() != n_channels {
            return Err(DaqError::ChannelCount {
                expected: n_channels,
                got: self.channel_ids.len(),
            });
        }
        if let Some(i) = self.channel_ids.iter().position(|id| id.trim().is_empty()) {
            return Err(DaqError::MissingChannelId(i + 1));
        }
        Ok(steps / rate)
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate as f64
    }
}

/// `time_s,P1_kPa,...,Pn_kPa`
pub fn csv_header(n_channels: usize) -> String {
    let mut header = String::from("time_s");
    for i in 1..=n_channels {
        header.push_str(&format!(",P{i}_kPa"));
    }
    header
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisor_rule() {
        let c = AcquisitionConfig::default();
        assert_eq!(c.decimation(1000.0, 5).unwrap(), 1);
        let c500 = AcquisitionConfig {
            sample_rate: 500,
            ..c.clone()
        };
        assert_eq!(c500.decimation(1000.0, 5).unwrap(), 2);
        for bad in [300, 0, 2000] {
            let cfg = AcquisitionConfig {
                sample_rate: bad,
                ..c.clone()
            };
            let err = cfg.decimation(1000.0, 5).unwrap_err();
            assert!(err.to_string().starts_with("invalid rate"), "{err}");
        }
    }

    #[test]
    fn channel_id_rules() {
        let mut c = AcquisitionConfig::default();
        c.channel_ids[2] = " ".into();
        assert_eq!(c.decimation(1000.0, 5).unwrap_err().to_string(), "channel id required for P3");
        c.channel_ids.pop();
        assert!(matches!(c.decimation(1000.0, 5), Err(DaqError::ChannelCount { .. })));
    }

    #[test]
    fn header() {
        assert_eq!(csv_header(5), "time_s,P1_kPa,P2_kPa,P3_kPa,P4_kPa,P5_kPa");
    }
}
