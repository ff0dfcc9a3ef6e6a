//! Timed control programs: the `.seq` language, validation against rig
//! limits, the execution scheduler, pin mapping and built-in patterns.

mod parser;
mod patterns;
mod pins;
mod program;
mod scheduler;
mod validate;

pub use parser::{parse_program, parse_program_for, Diagnostic, Position};
pub use patterns::{gen_wave, preset, PatternError, WaveSpec, PRESET_NAMES};
pub use pins::{map_pins, PinError, PinLevel, PinMap};
pub use program::{at, reg, valve, Command, LoopBlock, Program, Timed, TimedItem};
pub use scheduler::{ExecState, DUE_EPSILON};
pub use validate::{validate_program, Limits, DEFAULT_MAX_DURATION};
