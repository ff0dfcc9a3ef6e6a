//! Rig bring-up, headless runs and the line protocol server.

mod config;
mod headless;
pub mod protocol;
mod rig;
mod server;

pub use config::{ClockMode, ConfigFileError, PowerMetadata, RigConfig};
pub use headless::{load_source, run_headless, ProgramSource, RunError, RunOptions};
pub use protocol::{decode_request, Reply, Request, StateFrame, SummaryFrame};
pub use rig::{startup_sequence, Effect, Handled, Rig, RigError, Stage, StartupError};
pub use server::{serve, ServeError, ServerHandle};
