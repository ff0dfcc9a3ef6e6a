use serde::{Deserialize, Serialize};

use super::PlantError;

/// Physical and numerical parameters of the simulated pneumatic circuit.
///
/// Pressures are in kPa (gauge unless the field says otherwise), volumes in
/// m³ and conductances in kg·s⁻¹·Pa⁻¹. A conductance of zero isolates the
/// corresponding path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Compressor output, kPa gauge.
    pub supply_gauge: f64,
    pub n_channels: usize,
    /// Fixed volume of each pouch actuator, m³.
    pub actuator_volume: f64,
    /// Regulator node to actuator.
    pub fill_conductance: f64,
    /// Actuator to atmosphere through an open release valve.
    pub vent_conductance: f64,
    /// First-order lag of the electro-pneumatic regulator, s.
    pub regulator_tau: f64,
    /// Highest commandable regulator setpoint, kPa gauge.
    pub regulator_max: f64,
    pub gas_constant: f64,
    /// Gas temperature, K.
    pub temperature: f64,
    /// Ambient pressure, kPa absolute.
    pub atmosphere: f64,
    /// Standard deviation of additive sensor noise, kPa.
    pub sensor_noise_sigma: f64,
    pub adc_bits: u32,
    /// Sensor full scale, kPa gauge. The lower end is always 0.
    pub sensor_range: f64,
    /// Integration step, s.
    pub dt: f64,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            supply_gauge: 700.0,
            n_channels: 5,
            actuator_volume: 5.0e-5,
            fill_conductance: 2.973e-9,
            vent_conductance: 5.946e-9,
            regulator_tau: 0.05,
            regulator_max: 500.0,
            gas_constant: 287.0,
            temperature: 293.0,
            atmosphere: 101.325,
            sensor_noise_sigma: 0.2,
            adc_bits: 12,
            sensor_range: 500.0,
            dt: 0.001,
            seed: 0,
        }
    }
}

impl PlantConfig {
    /// Checks every field and the explicit-step stability bound.
    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("supply_gauge", self.supply_gauge),
            ("actuator_volume", self.actuator_volume),
            ("regulator_tau", self.regulator_tau),
            ("regulator_max", self.regulator_max),
            ("gas_constant", self.gas_constant),
            ("temperature", self.temperature),
            ("atmosphere", self.atmosphere),
            ("sensor_range", self.sensor_range),
            ("dt", self.dt),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(PlantError::Config {
                    field,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        let non_negative = [
            ("fill_conductance", self.fill_conductance),
            ("vent_conductance", self.vent_conductance),
            ("sensor_noise_sigma", self.sensor_noise_sigma),
        ];
        for (field, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(PlantError::Config {
                    field,
                    reason: format!("must be finite and >= 0, got {value}"),
                });
            }
        }
        if self.n_channels == 0 {
            return Err(PlantError::Config {
                field: "n_channels",
                reason: "must be at least 1".into(),
            });
        }
        if !(1..=31).contains(&self.adc_bits) {
            return Err(PlantError::Config {
                field: "adc_bits",
                reason: format!("must be within 1..=31, got {}", self.adc_bits),
            });
        }
        let rt_over_v = self.gas_constant * self.temperature / self.actuator_volume;
        for (field, k) in [
            ("fill_conductance", self.fill_conductance),
            ("vent_conductance", self.vent_conductance),
        ] {
            let factor = self.dt * k * rt_over_v;
            if factor >= 1.0 {
                return Err(PlantError::Config {
                    field: "stability",
                    reason: format!("dt·{field}·R·T/V = {factor} must be < 1"),
                });
            }
        }
        Ok(())
    }

    /// Charge time constant of one actuator, `V / (R·T·k_fill)`.
    pub fn fill_time_constant(&self) -> f64 {
        self.actuator_volume / (self.gas_constant * self.temperature * self.fill_conductance)
    }

    /// Discharge time constant through an open release valve.
    pub fn vent_time_constant(&self) -> f64 {
        self.actuator_volume / (self.gas_constant * self.temperature * self.vent_conductance)
    }

    /// Conductance that gives an actuator the time constant `tau`.
    pub fn conductance_for(&self, tau: f64) -> f64 {
        self.actuator_volume / (self.gas_constant * self.temperature * tau)
    }

    /// Number of integration steps per second.
    pub fn step_rate(&self) -> f64 {
        1.0 / self.dt
    }

    /// Gas mass held by `volume` at `p_abs` kPa.
    pub fn mass_at(&self, p_abs: f64, volume: f64) -> f64 {
        p_abs * 1000.0 * volume / (self.gas_constant * self.temperature)
    }

    /// Absolute pressure (kPa) of `mass` in `volume`.
    pub fn pressure_of(&self, mass: f64, volume: f64) -> f64 {
        mass * self.gas_constant * self.temperature / volume / 1000.0
    }

    /// Parses a flat `key = value` file. Missing keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, PlantError> {
        let config: Self = toml::from_str(text).map_err(|e| PlantError::Config {
            field: "file",
            reason: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }
}
