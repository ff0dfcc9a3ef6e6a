use std::path::PathBuf;

use thiserror::Error;

use super::config::RigConfig;
use super::rig::{startup_sequence, RigError, StartupError};
use crate::control::{parse_program_for, preset, Diagnostic, PatternError, Program};
use crate::daq::{DaqError, Summary};

/// Where a headless run takes its program from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProgramSource {
    File(PathBuf),
    Preset(String),
}

impl std::str::FromStr for ProgramSource {
    type Err = std::convert::Infallible;

    /// `preset:NAME` selects a built-in program; anything else is a path.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.strip_prefix("preset:") {
            Some(name) => ProgramSource::Preset(name.to_string()),
            None => ProgramSource::File(s.into()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub program: ProgramSource,
    /// Simulated seconds; defaults to the program duration.
    pub duration: Option<f64>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub rate: Option<u32>,
    pub config: RigConfig,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot read {path}: {source}")]
    ReadProgram {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("program rejected")]
    Program(Vec<Diagnostic>),
    #[error(transparent)]
    Preset(#[from] PatternError),
    #[error("invalid duration {0}")]
    Duration(f64),
    #[error(transparent)]
    Startup(#[from] StartupError),
    #[error(transparent)]
    Rig(#[from] RigError),
}

impl RunError {
    /// Process exit status: 2 for rejected input, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::ReadProgram { .. } => 3,
            RunError::Startup(e) if e.is_io => 3,
            RunError::Rig(RigError::Daq(DaqError::Io { .. })) => 3,
            _ => 2,
        }
    }
}

/// Reads and parses a program against `n_channels`.
pub fn load_source(source: &ProgramSource, n_channels: usize) -> Result<Program, RunError> {
    match source {
        ProgramSource::Preset(name) => Ok(preset(name)?),
        ProgramSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| RunError::ReadProgram {
                path: path.display().to_string(),
                source,
            })?;
            parse_program_for(&text, n_channels).map_err(RunError::Program)
        }
    }
}

/// Brings the rig up, logs `duration` seconds of the program to `out` and
/// returns the acquisition summary. Output depends only on the inputs.
pub fn run_headless(options: RunOptions) -> Result<Summary, RunError> {
    let mut config = options.config;
    if let Some(seed) = options.seed {
        config.plant.seed = seed;
    }
    if let Some(rate) = options.rate {
        config.acquisition.sample_rate = rate;
    }
    config.acquisition.csv_path = options.out;
    let program = load_source(&options.program, config.plant.n_channels)?;
    let duration = options.duration.unwrap_or_else(|| program.duration());
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(RunError::Duration(duration));
    }
    let dt = config.plant.dt;

    let mut rig = startup_sequence(config)?;
    let diags = rig.load_program(program);
    if !diags.is_empty() {
        return Err(RunError::Program(diags));
    }
    rig.start_acquisition()?;
    rig.run()?;
    rig.advance((duration / dt).round() as u64)?;
    rig.settle()?;
    Ok(rig.stop_acquisition()?)
}
