//! Browser bindings: step response against its closed form, program runs
//! rendered as pressure traces, and the wave generator.

use std::io::Write;
use std::sync::{Arc, Mutex};

use pouch_rig::control::{gen_wave, preset, WaveSpec, PRESET_NAMES};
use pouch_rig::gateway::{startup_sequence, RigConfig};
use pouch_rig::plant::{PlantConfig, PlantState, SetpointOutcome};
use wasm_bindgen::prelude::*;

/// Upper bound on simulated time per call, s.
pub const MAX_SECONDS: f64 = 600.0;

/// Sampled traces: a time axis plus one column per series.
#[wasm_bindgen]
pub struct Traces {
    time: Vec<f64>,
    series: Vec<Vec<f64>>,
    csv: String,
}

#[wasm_bindgen]
impl Traces {
    pub fn time(&self) -> Vec<f64> {
        self.time.clone()
    }

    #[wasm_bindgen(js_name = seriesCount)]
    pub fn series_count(&self) -> usize {
        self.series.len()
    }

    pub fn series(&self, index: usize) -> Vec<f64> {
        self.series.get(index).cloned().unwrap_or_default()
    }

    /// The logged CSV, empty for step responses.
    pub fn csv(&self) -> String {
        self.csv.clone()
    }
}

fn check_seconds(seconds: f64) -> Result<(), String> {
    if seconds.is_finite() && seconds > 0.0 && seconds <= MAX_SECONDS {
        Ok(())
    } else {
        Err(format!("duration must be in (0, {MAX_SECONDS}] s"))
    }
}

/// Channel 1 stepped to `kpa` from rest. Series 0 is the simulated gauge,
/// series 1 the first-order closed form with the same conductances.
#[wasm_bindgen(js_name = stepResponse)]
pub fn step_response(kpa: f64, vent_open: bool, ideal_regulator: bool, seconds: f64) -> Result<Traces, String> {
    check_seconds(seconds)?;
    let mut cfg = PlantConfig {
        sensor_noise_sigma: 0.0,
        adc_bits: 31,
        ..PlantConfig::default()
    };
    if ideal_regulator {
        cfg.regulator_tau = 1e-9;
    }
    let mut plant = PlantState::new(&cfg).map_err(|e| e.to_string())?;
    let applied = match plant.set_regulator(&cfg, 1, kpa).map_err(|e| e.to_string())? {
        SetpointOutcome::Applied => kpa,
        SetpointOutcome::Clamped { applied, .. } => applied,
    };
    plant.set_valve(1, vent_open).map_err(|e| e.to_string())?;

    let vent = if vent_open { cfg.vent_conductance } else { 0.0 };
    let total = cfg.fill_conductance + vent;
    let tau = cfg.actuator_volume / (cfg.gas_constant * cfg.temperature * total);
    let settle = applied * cfg.fill_conductance / total;

    let n = (seconds / cfg.dt).round() as usize;
    let every = (n / 2000).max(1);
    let mut time = Vec::new();
    let mut sim = Vec::new();
    let mut oracle = Vec::new();
    for k in 1..=n {
        plant.step(&cfg);
        if k % every == 0 {
            let t = plant.sim_time();
            time.push(t);
            sim.push(plant.read_sensor(&cfg, 1).map_err(|e| e.to_string())?.gauge);
            oracle.push(settle * -(-t / tau).exp_m1());
        }
    }
    Ok(Traces {
        time,
        series: vec![sim, oracle],
        csv: String::new(),
    })
}

#[derive(Clone, Default)]
struct SharedBuf(Arc<Mutex<Vec<u8>>>);

impl Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn parse_csv(csv: &str, n_channels: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut time = Vec::new();
    let mut series = vec![Vec::new(); n_channels];
    for line in csv.lines().skip(1) {
        let mut fields = line.split(',').map(|f| f.parse::<f64>().unwrap_or(f64::NAN));
        time.push(fields.next().unwrap_or(f64::NAN));
        for (col, v) in series.iter_mut().zip(fields) {
            col.push(v);
        }
    }
    (time, series)
}

/// Runs `.seq` source (or `preset:NAME`) on a freshly started rig and
/// returns the logged pressures, one series per channel. Errors carry the
/// diagnostics, one per line.
#[wasm_bindgen(js_name = runProgram)]
pub fn run_program(source: &str, seconds: f64, rate: u32, seed: u64) -> Result<Traces, String> {
    check_seconds(seconds)?;
    let mut config = RigConfig::default();
    config.plant.seed = seed;
    config.acquisition.sample_rate = rate;
    let mut rig = startup_sequence(config).map_err(|e| e.to_string())?;
    let diags = match source.trim().strip_prefix("preset:") {
        Some(name) => rig.load_program(preset(name.trim()).map_err(|e| e.to_string())?),
        None => rig.load_program_text(source),
    };
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(lines.join("\n"));
    }
    let buf = SharedBuf::default();
    rig.start_acquisition_into(Box::new(buf.clone())).map_err(|e| e.to_string())?;
    rig.run().map_err(|e| e.to_string())?;
    let dt = rig.config().plant.dt;
    rig.advance((seconds / dt).round() as u64).map_err(|e| e.to_string())?;
    rig.stop_acquisition().map_err(|e| e.to_string())?;
    let csv = String::from_utf8(buf.0.lock().unwrap().clone()).map_err(|e| e.to_string())?;
    let (time, series) = parse_csv(&csv, rig.plant().n_channels());
    Ok(Traces { time, series, csv })
}

/// Square wave over comma-separated channels, rendered as `.seq` text.
#[wasm_bindgen(js_name = waveProgram)]
pub fn wave_program(
    channels: &str,
    period: f64,
    high_kpa: f64,
    duty: f64,
    phase_frac: f64,
    cycles: u32,
) -> Result<String, String> {
    let channels = channels
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| c.parse::<usize>().map_err(|_| format!("bad channel '{c}'")))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = WaveSpec {
        channels,
        period,
        high_kpa,
        duty,
        phase_frac,
        cycles,
    };
    Ok(gen_wave(&spec).map_err(|e| e.to_string())?.render())
}

/// Canonical text of a built-in program.
#[wasm_bindgen(js_name = presetText)]
pub fn preset_text(name: &str) -> Result<String, String> {
    Ok(preset(name).map_err(|e| e.to_string())?.render())
}

#[wasm_bindgen(js_name = presetNames)]
pub fn preset_names() -> String {
    PRESET_NAMES.join(",")
}
