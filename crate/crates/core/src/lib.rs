//! Digital twin of a five-channel pneumatic soft pouch actuator rig.
//!
//! * [`plant`]: lumped-parameter simulation of supply, regulators, release
//!   valves, actuators and pressure sensors.
//! * [`control`]: the `.seq` schedule language, its scheduler, pin mapping
//!   and preset programs.
//! * [`daq`]: synchronous sampling, CSV logging and lossy telemetry fan-out.
//! * [`gateway`]: rig bring-up, headless runs and the line protocol server.

pub mod control;
pub mod daq;
pub mod gateway;
pub mod plant;
