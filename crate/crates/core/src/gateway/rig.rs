use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::config::{ClockMode, RigConfig};
use super::protocol::{Reply, Request, StateFrame};
use crate::control::{
    parse_program_for, preset, validate_program, Command, Diagnostic, ExecState, Limits, Program,
};
use crate::daq::{DaqError, Session, Subscription, Summary};
use crate::plant::{PlantError, PlantState, SensorReading, SetpointOutcome};

/// Bring-up stages in operating order: power, plant, acquisition, control,
/// and finally the compressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Power,
    Plant,
    Acquisition,
    Control,
    /// Everything initialized, compressor still off.
    AwaitingSupply,
    Ready,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Power => "power",
            Stage::Plant => "plant",
            Stage::Acquisition => "acquisition",
            Stage::Control => "control",
            Stage::AwaitingSupply => "awaiting_supply",
            Stage::Ready => "ready",
        })
    }
}

#[derive(Debug, Error)]
#[error("startup aborted at stage {stage}: {message}")]
pub struct StartupError {
    pub stage: Stage,
    pub message: String,
    /// The failure concerns the filesystem rather than a setting.
    pub is_io: bool,
}

#[derive(Debug, Error)]
pub enum RigError {
    #[error("no program loaded")]
    NoProgram,
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Daq(#[from] DaqError),
    #[error("acquisition already active")]
    AcquisitionActive,
    #[error("acquisition not active")]
    AcquisitionInactive,
}

/// Side effects of a handled message that the owner of the loop must act on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Effect {
    AcquisitionStarted,
    AcquisitionStopped,
    /// `run_for`: seconds to keep advancing in fast clock mode.
    ProgramStarted { run_for: Option<f64> },
    ProgramStopped,
}

#[derive(Debug)]
pub struct Handled {
    pub replies: Vec<Reply>,
    pub effects: Vec<Effect>,
}

/// The simulated rig and everything that drives it. One owner steps it;
/// commands are applied only between steps.
#[derive(Debug)]
pub struct Rig {
    config: RigConfig,
    plant: PlantState,
    stage: Stage,
    program: Option<Arc<Program>>,
    exec: Option<ExecState>,
    session: Option<Session>,
    last_summary: Option<Summary>,
}

fn check_csv_parent(path: &Path) -> Result<(), String> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(format!("directory {} does not exist", dir.display()))
        }
        _ if path.is_dir() => Err(format!("{} is a directory", path.display())),
        _ => Ok(()),
    }
}

impl Rig {
    /// Runs every bring-up stage except the last: the compressor stays off.
    pub fn bring_up(config: RigConfig) -> Result<Self, StartupError> {
        let fail = |stage, message: String, is_io| StartupError {
            stage,
            message,
            is_io,
        };
        if config.metadata.mains.trim().is_empty() || config.metadata.dc_rail.trim().is_empty() {
            return Err(fail(Stage::Power, "power rails must be described".into(), false));
        }
        let plant = PlantState::new_unpressurized(&config.plant)
            .map_err(|e| fail(Stage::Plant, e.to_string(), false))?;
        config
            .acquisition
            .decimation(config.plant.step_rate(), config.plant.n_channels)
            .map_err(|e| fail(Stage::Acquisition, e.to_string(), false))?;
        check_csv_parent(&config.acquisition.csv_path)
            .map_err(|e| fail(Stage::Acquisition, e, true))?;
        config
            .pin_map
            .validate()
            .map_err(|e| fail(Stage::Control, e.to_string(), false))?;
        Ok(Self {
            config,
            plant,
            stage: Stage::AwaitingSupply,
            program: None,
            exec: None,
            session: None,
            last_summary: None,
        })
    }

    /// Final stage: pressurize the supply.
    pub fn enable_supply(&mut self) {
        self.plant.set_supply(&self.config.plant, true);
        self.stage = Stage::Ready;
    }

    pub fn config(&self) -> &RigConfig {
        &self.config
    }

    pub fn plant(&self) -> &PlantState {
        &self.plant
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn sim_time(&self) -> f64 {
        self.plant.sim_time()
    }

    pub fn limits(&self) -> Limits {
        Limits::from_config(&self.config.plant)
    }

    pub fn program(&self) -> Option<&Program> {
        self.program.as_deref()
    }

    pub fn is_running(&self) -> bool {
        self.exec.as_ref().is_some_and(ExecState::is_running)
    }

    pub fn acquisition_active(&self) -> bool {
        self.session.as_ref().is_some_and(Session::is_active)
    }

    pub fn rows_written(&self) -> u64 {
        match &self.session {
            Some(s) => s.rows_written(),
            None => self.last_summary.map_or(0, |s| s.rows_written),
        }
    }

    /// Loads a program if it passes validation; otherwise returns the
    /// diagnostics and keeps the previous program.
    pub fn load_program(&mut self, program: Program) -> Vec<Diagnostic> {
        let diags = validate_program(&program, &self.limits());
        if diags.is_empty() {
            self.program = Some(Arc::new(program));
        }
        diags
    }

    pub fn load_program_text(&mut self, text: &str) -> Vec<Diagnostic> {
        match parse_program_for(text, self.config.plant.n_channels) {
            Ok(program) => self.load_program(program),
            Err(diags) => diags,
        }
    }

    /// Starts the loaded program at the current simulation time.
    pub fn run(&mut self) -> Result<(), RigError> {
        let program = self.program.clone().ok_or(RigError::NoProgram)?;
        self.exec = Some(ExecState::start(program, self.plant.sim_time()));
        Ok(())
    }

    pub fn stop_program(&mut self) {
        if let Some(exec) = &mut self.exec {
            exec.stop();
        }
    }

    /// Applies one command now. Returns a warning when a setpoint was clamped.
    pub fn apply(&mut self, command: Command) -> Result<Option<String>, RigError> {
        match command {
            Command::SetRegulator { channel, kpa } => {
                match self.plant.set_regulator(&self.config.plant, channel, kpa)? {
                    SetpointOutcome::Applied => Ok(None),
                    SetpointOutcome::Clamped { requested, applied } => Ok(Some(format!(
                        "channel {channel} setpoint {requested} kPa clamped to {applied} kPa"
                    ))),
                }
            }
            Command::SetValve { channel, open } => {
                self.plant.set_valve(channel, open)?;
                Ok(None)
            }
            Command::End => {
                self.stop_program();
                Ok(None)
            }
        }
    }

    pub fn start_acquisition(&mut self) -> Result<(), RigError> {
        if self.acquisition_active() {
            return Err(RigError::AcquisitionActive);
        }
        let session = Session::start(self.config.acquisition.clone(), &self.config.plant)?;
        self.session = Some(session);
        Ok(())
    }

    /// Logs into `writer` instead of the configured CSV path.
    pub fn start_acquisition_into(
        &mut self,
        writer: Box<dyn std::io::Write + Send>,
    ) -> Result<(), RigError> {
        if self.acquisition_active() {
            return Err(RigError::AcquisitionActive);
        }
        let session =
            Session::with_writer(self.config.acquisition.clone(), &self.config.plant, writer)?;
        self.session = Some(session);
        Ok(())
    }

    /// Stops the active session, or repeats the last summary if it already
    /// stopped.
    pub fn stop_acquisition(&mut self) -> Result<Summary, RigError> {
        match self.session.take() {
            Some(mut session) => {
                let summary = session.stop()?;
                self.last_summary = Some(summary);
                Ok(summary)
            }
            None => self.last_summary.ok_or(RigError::AcquisitionInactive),
        }
    }

    pub fn subscribe(&mut self) -> Option<Subscription> {
        self.session.as_mut().and_then(|s| s.subscribe().ok())
    }

    pub fn sample_sensors(&mut self) -> Vec<SensorReading> {
        self.plant.read_all(&self.config.plant)
    }

    /// One simulation step: release due program commands, integrate, then
    /// sample if the acquisition clock ticks. Returns warnings produced by
    /// program commands.
    pub fn step(&mut self) -> Result<Vec<String>, RigError> {
        let warnings = self.settle()?;
        self.plant.step(&self.config.plant);
        if let Some(session) = self.session.as_mut() {
            if session.is_due(self.plant.steps()) {
                let readings = self.plant.read_all(&self.config.plant);
                session.sample(&readings, self.plant.sim_time())?;
            }
        }
        Ok(warnings)
    }

    /// Releases commands due at the current time without integrating.
    pub fn settle(&mut self) -> Result<Vec<String>, RigError> {
        let mut warnings = Vec::new();
        if let Some(exec) = self.exec.as_mut().filter(|e| e.is_running()) {
            for command in exec.tick(self.plant.sim_time()) {
                if let Some(w) = self.apply(command)? {
                    warnings.push(w);
                }
            }
        }
        Ok(warnings)
    }

    /// Steps `n` times.
    pub fn advance(&mut self, n: u64) -> Result<(), RigError> {
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    pub fn status(&self, id: Option<u64>) -> StateFrame {
        let supply_gauge = self.plant.supply_abs() - self.config.plant.atmosphere;
        StateFrame {
            id,
            sim_time: self.plant.sim_time(),
            stage: self.stage.to_string(),
            supply_enabled: self.plant.supply_enabled(),
            supply_kpa: supply_gauge,
            setpoints: self.plant.channels().iter().map(|c| c.setpoint()).collect(),
            valves: self.plant.channels().iter().map(|c| c.valve_open()).collect(),
            gauges: self.plant.gauges(),
            program_loaded: self.program.is_some(),
            program_running: self.is_running(),
            daq_active: self.acquisition_active(),
            rows_written: self.rows_written(),
            clock: match self.config.clock_mode {
                ClockMode::Realtime => "realtime".into(),
                ClockMode::Fast => "fast".into(),
            },
        }
    }

    /// Dispatches one request. Never panics on request content; failures
    /// become `err` replies.
    pub fn handle_message(&mut self, request: Request) -> Handled {
        let id = request.id();
        let mut effects = Vec::new();
        let err = |msg: String| Handled {
            replies: vec![Reply::err(Some(id), msg)],
            effects: Vec::new(),
        };
        let ack_state = |rig: &Rig, ack: Reply, effects: Vec<Effect>| Handled {
            replies: vec![ack, Reply::State(rig.status(Some(id)))],
            effects,
        };
        match request {
            Request::Hello { .. } => ack_state(self, Reply::ack(id), effects),
            Request::StatusReq { .. } => Handled {
                replies: vec![Reply::State(self.status(Some(id)))],
                effects,
            },
            Request::Configure {
                csv_path,
                sample_rate,
                terminal_config,
                channel_ids,
                ..
            } => {
                if self.acquisition_active() {
                    return err("cannot configure while acquisition is active".into());
                }
                let mut acq = self.config.acquisition.clone();
                if let Some(path) = csv_path {
                    acq.csv_path = path.into();
                }
                if let Some(rate) = sample_rate {
                    acq.sample_rate = rate;
                }
                if let Some(tc) = terminal_config {
                    acq.terminal_config = tc;
                }
                if let Some(ids) = channel_ids {
                    acq.channel_ids = ids;
                }
                if let Err(e) = acq.decimation(self.config.plant.step_rate(), self.config.plant.n_channels) {
                    return err(e.to_string());
                }
                self.config.acquisition = acq;
                ack_state(self, Reply::ack(id), effects)
            }
            Request::SetReg { ch, kpa, .. } => {
                match self.apply(Command::SetRegulator { channel: ch, kpa }) {
                    Ok(warning) => {
                        let mut ack = Reply::ack(id);
                        if let (Reply::Ack { warnings, .. }, Some(w)) = (&mut ack, warning) {
                            warnings.push(w);
                        }
                        ack_state(self, ack, effects)
                    }
                    Err(e) => err(e.to_string()),
                }
            }
            Request::SetValve { ch, open, .. } => {
                match self.apply(Command::SetValve { channel: ch, open }) {
                    Ok(_) => ack_state(self, Reply::ack(id), effects),
                    Err(e) => err(e.to_string()),
                }
            }
            Request::LoadProgram { text, preset: name, .. } => {
                let diags = match (text, name) {
                    (Some(text), None) => self.load_program_text(&text),
                    (None, Some(name)) => match preset(&name) {
                        Ok(p) => self.load_program(p),
                        Err(e) => return err(e.to_string()),
                    },
                    _ => return err("load_program needs exactly one of text or preset".into()),
                };
                let ack = Reply::Ack {
                    id,
                    loaded: Some(diags.is_empty()),
                    diagnostics: diags.iter().map(ToString::to_string).collect(),
                    warnings: Vec::new(),
                    summary: None,
                };
                ack_state(self, ack, effects)
            }
            Request::Run { duration, .. } => {
                if let Some(d) = duration.filter(|d| !(d.is_finite() && *d >= 0.0)) {
                    return err(format!("invalid duration {d}"));
                }
                match self.run() {
                    Ok(()) => {
                        effects.push(Effect::ProgramStarted { run_for: duration });
                        ack_state(self, Reply::ack(id), effects)
                    }
                    Err(e) => err(e.to_string()),
                }
            }
            Request::Stop { .. } => {
                self.stop_program();
                effects.push(Effect::ProgramStopped);
                ack_state(self, Reply::ack(id), effects)
            }
            Request::DaqStart { .. } => match self.start_acquisition() {
                Ok(()) => {
                    effects.push(Effect::AcquisitionStarted);
                    ack_state(self, Reply::ack(id), effects)
                }
                Err(e) => err(e.to_string()),
            },
            Request::DaqStop { .. } => match self.stop_acquisition() {
                Ok(summary) => {
                    effects.push(Effect::AcquisitionStopped);
                    let ack = Reply::Ack {
                        id,
                        loaded: None,
                        diagnostics: Vec::new(),
                        warnings: Vec::new(),
                        summary: Some(summary.into()),
                    };
                    ack_state(self, ack, effects)
                }
                Err(e) => err(e.to_string()),
            },
        }
    }
}

/// Full bring-up including the compressor.
pub fn startup_sequence(config: RigConfig) -> Result<Rig, StartupError> {
    let mut rig = Rig::bring_up(config)?;
    rig.enable_supply();
    Ok(rig)
}
