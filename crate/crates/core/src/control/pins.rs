use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::program::Command;

/// Microcontroller wiring: digital pins 1–5 drive the regulator inputs
/// No.1–No.5, pins 6–10 drive transistor-array inputs I1–I5 which switch
/// release valves R1–R5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinMap {
    pub regulator_pins: BTreeMap<u8, usize>,
    pub valve_pins: BTreeMap<u8, usize>,
}

impl Default for PinMap {
    fn default() -> Self {
        Self {
            regulator_pins: (1..=5).map(|p| (p, p as usize)).collect(),
            valve_pins: (6..=10).map(|p| (p, p as usize - 5)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PinError {
    #[error("pin {0} is not mapped")]
    Unmapped(u8),
    #[error("pin {pin}: {reason}")]
    BadLevel { pin: u8, reason: &'static str },
    #[error("pin {0} is mapped as both regulator and valve pin")]
    Overlap(u8),
    #[error("channel {0} is driven by more than one pin")]
    NotInjective(usize),
}

/// Level presented on one pin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PinLevel {
    Low,
    High,
    /// Numeric regulator command, converted with `levels_to_kpa`.
    Level(f64),
}

impl PinMap {
    /// Maps must be injective and use disjoint pin sets.
    pub fn validate(&self) -> Result<(), PinError> {
        if let Some(&pin) = self.regulator_pins.keys().find(|p| self.valve_pins.contains_key(p)) {
            return Err(PinError::Overlap(pin));
        }
        for map in [&self.regulator_pins, &self.valve_pins] {
            let mut seen = BTreeSet::new();
            for &ch in map.values() {
                if !seen.insert(ch) {
                    return Err(PinError::NotInjective(ch));
                }
            }
        }
        Ok(())
    }

    /// Transistor-array input label (`I1`..) for a valve pin.
    pub fn transistor_input(&self, pin: u8) -> Option<String> {
        self.valve_pins.get(&pin).map(|ch| format!("I{ch}"))
    }
}

/// Translates one snapshot of pin levels into rig commands, one per pin, in
/// pin order.
pub fn map_pins(
    pins: &BTreeMap<u8, PinLevel>,
    pin_map: &PinMap,
    levels_to_kpa: f64,
) -> Result<Vec<Command>, PinError> {
    pins.iter()
        .map(|(&pin, &level)| {
            if let Some(&channel) = pin_map.valve_pins.get(&pin) {
                let open = match level {
                    PinLevel::High => true,
                    PinLevel::Low => false,
                    PinLevel::Level(_) => {
                        return Err(PinError::BadLevel {
                            pin,
                            reason: "valve pins are digital",
                        })
                    }
                };
                Ok(Command::SetValve { channel, open })
            } else if let Some(&channel) = pin_map.regulator_pins.get(&pin) {
                let PinLevel::Level(level) = level else {
                    return Err(PinError::BadLevel {
                        pin,
                        reason: "regulator pins carry a numeric level",
                    });
                };
                let kpa = level * levels_to_kpa;
                if !(kpa.is_finite() && kpa >= 0.0) {
                    return Err(PinError::BadLevel {
                        pin,
                        reason: "level must map to a finite non-negative pressure",
                    });
                }
                Ok(Command::SetRegulator { channel, kpa })
            } else {
                Err(PinError::Unmapped(pin))
            }
        })
        .collect()
}
