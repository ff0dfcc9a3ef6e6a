use serde::{Deserialize, Serialize};

use super::parser::Diagnostic;
use super::program::{fmt_num, Command, Program, Timed, TimedItem};
use crate::plant::PlantConfig;

/// Longest program accepted by default, s.
pub const DEFAULT_MAX_DURATION: f64 = 3600.0;

/// Rig limits a program is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub n_channels: usize,
    /// kPa gauge.
    pub regulator_max: f64,
    /// s.
    pub max_duration: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self::from_config(&PlantConfig::default())
    }
}

impl Limits {
    pub fn from_config(config: &PlantConfig) -> Self {
        Self {
            n_channels: config.n_channels,
            regulator_max: config.regulator_max,
            max_duration: DEFAULT_MAX_DURATION,
        }
    }
}

fn check_command(command: &Command, limits: &Limits, out: &mut Vec<Diagnostic>) {
    if let Some(ch) = command.channel() {
        if ch == 0 || ch > limits.n_channels {
            out.push(Diagnostic::program(format!("unknown channel {ch}")));
        }
    }
    if let Command::SetRegulator { channel, kpa } = *command {
        if !(kpa.is_finite() && kpa >= 0.0) {
            out.push(Diagnostic::program(format!(
                "invalid setpoint {kpa} on channel {channel}"
            )));
        } else if kpa > limits.regulator_max {
            out.push(Diagnostic::program(format!(
                "setpoint exceeds regulator_max ({kpa} > {} kPa on channel {channel})",
                limits.regulator_max
            )));
        }
    }
}

fn check_time(at: &Timed, out: &mut Vec<Diagnostic>) -> bool {
    let ok = at.time.is_finite() && at.time >= 0.0;
    if !ok {
        out.push(Diagnostic::program(format!("invalid time {}", at.time)));
    }
    ok
}

/// Checks a program against rig limits. An empty result means the program
/// can be loaded.
///
/// Structural rules enforced by the parser are re-checked here so that
/// programs built in code get the same treatment.
pub fn validate_program(program: &Program, limits: &Limits) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut cursor: f64 = 0.0;
    for item in &program.items {
        match item {
            TimedItem::At(at) => {
                if check_time(at, &mut out) && at.time < cursor {
                    out.push(Diagnostic::program(format!(
                        "time {} is earlier than the schedule position {cursor}",
                        at.time
                    )));
                }
                check_command(&at.command, limits, &mut out);
                cursor = cursor.max(at.time);
            }
            TimedItem::Loop(lp) => {
                if lp.count == 0 {
                    out.push(Diagnostic::program("loop count must be at least 1"));
                }
                if !(lp.period.is_finite() && lp.period > 0.0) {
                    out.push(Diagnostic::program(format!("invalid period {}", lp.period)));
                }
                let mut prev = 0.0;
                for at in &lp.body {
                    if check_time(at, &mut out) {
                        if at.time >= lp.period {
                            out.push(Diagnostic::program(format!(
                                "time {} ≥ period {}",
                                fmt_num(at.time),
                                fmt_num(lp.period)
                            )));
                        }
                        if at.time < prev {
                            out.push(Diagnostic::program(format!(
                                "time {} is earlier than the preceding time {prev}",
                                at.time
                            )));
                        }
                        prev = at.time;
                    }
                    check_command(&at.command, limits, &mut out);
                }
                cursor += lp.count as f64 * lp.period;
            }
        }
    }
    if cursor > limits.max_duration {
        out.push(Diagnostic::program(format!(
            "duration {cursor} s exceeds max_duration {} s",
            limits.max_duration
        )));
    }
    out
}
