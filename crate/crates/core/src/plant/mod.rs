//! Lumped-parameter model of the pneumatic circuit.
//!
//! Topology per channel: supply → regulator node → actuator → (release valve)
//! → atmosphere, with a pressure sensor on the actuator line. The gas is
//! treated as an isothermal ideal gas in fixed volumes and every path is a
//! linear conductance with a choked-flow cap. Stepping is explicit with a
//! fixed `dt`; identical inputs give bit-identical trajectories.

mod config;

pub use config::PlantConfig;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

/// Volume booked to each regulator node for mass accounting, m³.
pub const REGULATOR_NODE_VOLUME: f64 = 1.0e-6;

/// Largest fraction of the upstream pressure that can drive flow
/// (critical pressure ratio 0.528).
pub const CHOKED_DROP_FRACTION: f64 = 0.472;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("invalid plant configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("unknown channel {channel} (rig has {n_channels})")]
    UnknownChannel { channel: usize, n_channels: usize },
    #[error("{what} must be finite")]
    NonFinite { what: &'static str },
}

/// Mass flow (kg/s) through a conductance `k` between two absolute
/// pressures given in kPa. Positive when flowing from `p_up` to `p_down`.
pub fn orifice_flow(p_up: f64, p_down: f64, k: f64) -> f64 {
    if p_up >= p_down {
        k * 1000.0 * (p_up - p_down).min(CHOKED_DROP_FRACTION * p_up)
    } else {
        -(k * 1000.0 * (p_down - p_up).min(CHOKED_DROP_FRACTION * p_down))
    }
}

/// Result of a setpoint command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SetpointOutcome {
    Applied,
    Clamped { requested: f64, applied: f64 },
}

impl SetpointOutcome {
    pub fn was_clamped(&self) -> bool {
        matches!(self, SetpointOutcome::Clamped { .. })
    }
}

/// One digitized pressure sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensorReading {
    /// 1-based.
    pub channel: usize,
    /// kPa gauge, reconstructed from `raw_code`.
    pub gauge: f64,
    pub raw_code: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    setpoint: f64,
    regulator_abs: f64,
    actuator_mass: f64,
    actuator_abs: f64,
    valve_open: bool,
    sensor_rng: ChaCha8Rng,
}

impl ChannelState {
    /// Regulator setpoint, kPa gauge.
    pub fn setpoint(&self) -> f64 {
        self.setpoint
    }

    /// Regulator output node, kPa absolute.
    pub fn regulator_abs(&self) -> f64 {
        self.regulator_abs
    }

    pub fn actuator_mass(&self) -> f64 {
        self.actuator_mass
    }

    /// Actuator pressure, kPa absolute.
    pub fn actuator_abs(&self) -> f64 {
        self.actuator_abs
    }

    pub fn valve_open(&self) -> bool {
        self.valve_open
    }
}

/// The simulated rig at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    steps: u64,
    dt: f64,
    atmosphere: f64,
    supply_abs: f64,
    channels: Vec<ChannelState>,
}

fn sensor_seed(seed: u64, channel: usize) -> u64 {
    seed ^ (channel as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl PlantState {
    /// Fresh rig: actuators at atmosphere, setpoints 0, valves closed and the
    /// supply pressurized.
    pub fn new(config: &PlantConfig) -> Result<Self, PlantError> {
        config.validate()?;
        let atm = config.atmosphere;
        let mass = config.mass_at(atm, config.actuator_volume);
        let channels = (1..=config.n_channels)
            .map(|ch| ChannelState {
                setpoint: 0.0,
                regulator_abs: atm,
                actuator_mass: mass,
                actuator_abs: config.pressure_of(mass, config.actuator_volume),
                valve_open: false,
                sensor_rng: ChaCha8Rng::seed_from_u64(sensor_seed(config.seed, ch)),
            })
            .collect();
        Ok(Self {
            steps: 0,
            dt: config.dt,
            atmosphere: atm,
            supply_abs: atm + config.supply_gauge,
            channels,
        })
    }

    /// Same as [`PlantState::new`] but with the compressor off.
    pub fn new_unpressurized(config: &PlantConfig) -> Result<Self, PlantError> {
        let mut state = Self::new(config)?;
        state.supply_abs = config.atmosphere;
        Ok(state)
    }

    pub fn sim_time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Supply pressure, kPa absolute.
    pub fn supply_abs(&self) -> f64 {
        self.supply_abs
    }

    pub fn supply_enabled(&self) -> bool {
        self.supply_abs > self.atmosphere
    }

    pub fn set_supply(&mut self, config: &PlantConfig, enabled: bool) {
        self.supply_abs = if enabled {
            config.atmosphere + config.supply_gauge
        } else {
            config.atmosphere
        };
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[ChannelState] {
        &self.channels
    }

    /// Channel `ch` (1-based).
    pub fn channel(&self, ch: usize) -> Result<&ChannelState, PlantError> {
        let n_channels = self.channels.len();
        ch.checked_sub(1)
            .and_then(|i| self.channels.get(i))
            .ok_or(PlantError::UnknownChannel { channel: ch, n_channels })
    }

    fn channel_mut(&mut self, ch: usize) -> Result<&mut ChannelState, PlantError> {
        let n_channels = self.channels.len();
        ch.checked_sub(1)
            .and_then(|i| self.channels.get_mut(i))
            .ok_or(PlantError::UnknownChannel { channel: ch, n_channels })
    }

    /// True actuator gauge pressure of channel `ch`, kPa.
    pub fn gauge(&self, ch: usize) -> Result<f64, PlantError> {
        Ok(self.channel(ch)?.actuator_abs - self.atmosphere)
    }

    pub fn gauges(&self) -> Vec<f64> {
        self.channels
            .iter()
            .map(|c| c.actuator_abs - self.atmosphere)
            .collect()
    }

    /// Stores a regulator setpoint clamped to `[0, regulator_max]`.
    pub fn set_regulator(
        &mut self,
        config: &PlantConfig,
        ch: usize,
        setpoint: f64,
    ) -> Result<SetpointOutcome, PlantError> {
        if !setpoint.is_finite() {
            return Err(PlantError::NonFinite { what: "setpoint" });
        }
        let channel = self.channel_mut(ch)?;
        let applied = setpoint.clamp(0.0, config.regulator_max);
        channel.setpoint = applied;
        Ok(if applied == setpoint {
            SetpointOutcome::Applied
        } else {
            SetpointOutcome::Clamped {
                requested: setpoint,
                applied,
            }
        })
    }

    /// Energizes (`open = true`) or releases a normally-closed vent valve.
    pub fn set_valve(&mut self, ch: usize, open: bool) -> Result<(), PlantError> {
        self.channel_mut(ch)?.valve_open = open;
        Ok(())
    }

    /// Advances one explicit step of `config.dt`.
    pub fn step(&mut self, config: &PlantConfig) {
        debug_assert_eq!(config.dt, self.dt, "plant stepped with a foreign dt");
        let dt = config.dt;
        let atm = config.atmosphere;
        let supply = self.supply_abs;
        let tracking = -(-dt / config.regulator_tau).exp_m1();
        for channel in &mut self.channels {
            let target = (atm + channel.setpoint).min(supply);
            let node = channel.regulator_abs + (target - channel.regulator_abs) * tracking;
            channel.regulator_abs = node.clamp(0.0, supply.max(atm));

            let mut flow = orifice_flow(
                channel.regulator_abs,
                channel.actuator_abs,
                config.fill_conductance,
            );
            if channel.valve_open {
                flow -= orifice_flow(channel.actuator_abs, atm, config.vent_conductance);
            }
            channel.actuator_mass = (channel.actuator_mass + flow * dt).max(0.0);
            channel.actuator_abs = config.pressure_of(channel.actuator_mass, config.actuator_volume);
        }
        self.steps += 1;
    }

    /// Samples the pressure sensor on channel `ch`, advancing its noise
    /// generator by one draw.
    pub fn read_sensor(
        &mut self,
        config: &PlantConfig,
        ch: usize,
    ) -> Result<SensorReading, PlantError> {
        let atm = self.atmosphere;
        let channel = self.channel_mut(ch)?;
        let z: f64 = StandardNormal.sample(&mut channel.sensor_rng);
        let noisy = channel.actuator_abs - atm + z * config.sensor_noise_sigma;
        let clamped = noisy.clamp(0.0, config.sensor_range);
        let levels = (1u32 << config.adc_bits) - 1;
        let raw_code = ((clamped / config.sensor_range * levels as f64).round() as u32).min(levels);
        Ok(SensorReading {
            channel: ch,
            gauge: raw_code as f64 * config.sensor_range / levels as f64,
            raw_code,
        })
    }

    /// Reads every sensor in channel order.
    pub fn read_all(&mut self, config: &PlantConfig) -> Vec<SensorReading> {
        (1..=self.channels.len())
            .map(|ch| self.read_sensor(config, ch).expect("channel in range"))
            .collect()
    }

    /// Gas mass in all actuators and regulator nodes, kg.
    pub fn total_mass(&self, config: &PlantConfig) -> f64 {
        self.channels
            .iter()
            .map(|c| c.actuator_mass + config.mass_at(c.regulator_abs, REGULATOR_NODE_VOLUME))
            .sum()
    }
}
