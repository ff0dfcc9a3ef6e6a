//! Rhythmic pattern generator and the built-in preset programs.

use thiserror::Error;

use super::parser::parse_program;
use super::program::{at, reg, valve, LoopBlock, Program, Timed, TimedItem};

pub const PRESET_NAMES: [&str; 3] = ["fig7_validation", "diarrhea_seal", "peristaltic_cut"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("invalid wave parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("unknown preset '{0}' (available: fig7_validation, diarrhea_seal, peristaltic_cut)")]
    UnknownPreset(String),
}

/// Square pressure wave over several channels.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSpec {
    /// Ordered; position `k` is delayed by `k · phase_frac · period`.
    pub channels: Vec<usize>,
    /// s.
    pub period: f64,
    /// kPa gauge during the high phase.
    pub high_kpa: f64,
    /// Fraction of the period spent pressurized, exclusive 0..1.
    pub duty: f64,
    /// Per-channel delay as a fraction of the period, 0..1.
    pub phase_frac: f64,
    pub cycles: u32,
}

fn param(name: &'static str, reason: impl Into<String>) -> PatternError {
    PatternError::Parameter {
        name,
        reason: reason.into(),
    }
}

/// One loop whose body raises each channel to `high_kpa` with its valve
/// closed for `duty · period`, then drops the setpoint and vents for the rest
/// of the period.
pub fn gen_wave(spec: &WaveSpec) -> Result<Program, PatternError> {
    if !(spec.period.is_finite() && spec.period > 0.0) {
        return Err(param("period", "must be > 0"));
    }
    if !(spec.duty > 0.0 && spec.duty < 1.0) {
        return Err(param("duty", format!("{} is outside (0, 1)", spec.duty)));
    }
    if !(spec.phase_frac >= 0.0 && spec.phase_frac < 1.0) {
        return Err(param("phase_frac", format!("{} is outside [0, 1)", spec.phase_frac)));
    }
    if !(spec.high_kpa.is_finite() && spec.high_kpa >= 0.0) {
        return Err(param("high_kpa", "must be finite and >= 0"));
    }
    if spec.cycles == 0 {
        return Err(param("cycles", "must be at least 1"));
    }
    if spec.channels.is_empty() {
        return Err(param("channels", "at least one channel required"));
    }
    for (i, &ch) in spec.channels.iter().enumerate() {
        if ch == 0 {
            return Err(param("channels", "channels start at 1"));
        }
        if spec.channels[..i].contains(&ch) {
            return Err(param("channels", format!("channel {ch} listed twice")));
        }
    }

    let mut body: Vec<Timed> = Vec::with_capacity(spec.channels.len() * 4);
    for (k, &ch) in spec.channels.iter().enumerate() {
        let rise = (k as f64 * spec.phase_frac * spec.period) % spec.period;
        let fall = (rise + spec.duty * spec.period) % spec.period;
        body.push(at(rise, valve(ch, false)));
        body.push(at(rise, reg(ch, spec.high_kpa)));
        body.push(at(fall, reg(ch, 0.0)));
        body.push(at(fall, valve(ch, true)));
    }
    body.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(Program::new(vec![TimedItem::Loop(LoopBlock {
        count: spec.cycles,
        period: spec.period,
        body,
    })]))
}

/// Built-in program by name. `peristalsis_cut` is accepted as an alias of
/// `peristaltic_cut`.
pub fn preset(name: &str) -> Result<Program, PatternError> {
    match name {
        "fig7_validation" => Ok(fig7_validation()),
        "diarrhea_seal" => Ok(embedded(include_str!("../../presets/diarrhea_seal.seq"))),
        "peristaltic_cut" | "peristalsis_cut" => {
            Ok(embedded(include_str!("../../presets/peristaltic_cut.seq")))
        }
        other => Err(PatternError::UnknownPreset(other.to_string())),
    }
}

fn embedded(text: &str) -> Program {
    parse_program(text).expect("embedded preset parses")
}

/// Channels 1–3 held at 0 kPa; channels 4 and 5 cycled 30 kPa / vent on a
/// 20 s square wave for 400 s.
fn fig7_validation() -> Program {
    let wave = gen_wave(&WaveSpec {
        channels: vec![4, 5],
        period: 20.0,
        high_kpa: 30.0,
        duty: 0.5,
        phase_frac: 0.0,
        cycles: 20,
    })
    .expect("static wave parameters");
    let mut items: Vec<TimedItem> = (1..=3).map(|ch| TimedItem::At(at(0.0, reg(ch, 0.0)))).collect();
    items.extend(wave.items);
    Program::new(items)
}

#[cfg(test)]
mod tests {
    use super::super::program::Command;
    use super::super::validate::{validate_program, Limits};
    use super::*;

    fn base() -> WaveSpec {
        WaveSpec {
            channels: vec![1],
            period: 2.0,
            high_kpa: 30.0,
            duty: 0.5,
            phase_frac: 0.0,
            cycles: 3,
        }
    }

    #[test]
    fn single_channel_square_wave() {
        let p = gen_wave(&base()).unwrap();
        let sched = p.expand();
        let setpoints: Vec<(f64, f64)> = sched
            .iter()
            .filter_map(|(t, c)| match c {
                Command::SetRegulator { kpa, .. } => Some((*t, *kpa)),
                _ => None,
            })
            .collect();
        assert_eq!(
            setpoints,
            vec![(0.0, 30.0), (1.0, 0.0), (2.0, 30.0), (3.0, 0.0), (4.0, 30.0), (5.0, 0.0)]
        );
        assert_eq!(p.duration(), 6.0);
    }

    #[test]
    fn phase_offsets_per_position() {
        let spec = WaveSpec {
            channels: vec![1, 2, 3],
            period: 3.0,
            phase_frac: 1.0 / 3.0,
            ..base()
        };
        let p = gen_wave(&spec).unwrap();
        let TimedItem::Loop(lp) = &p.items[0] else { panic!() };
        for k in 1..=3usize {
            let rise = lp
                .body
                .iter()
                .find(|a| a.command == reg(k, 30.0))
                .unwrap()
                .time;
            assert!((rise - (k - 1) as f64 * spec.period / 3.0).abs() < 1e-12, "ch {k}: {rise}");
        }
        // body stays sorted and inside the period
        assert!(lp.body.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(lp.body.iter().all(|a| a.time < spec.period));
    }

    #[test]
    fn parameter_errors() {
        assert!(gen_wave(&WaveSpec { duty: 0.0, ..base() }).is_err());
        assert!(gen_wave(&WaveSpec { duty: 1.0, ..base() }).is_err());
        assert!(gen_wave(&WaveSpec { period: 0.0, ..base() }).is_err());
        assert!(gen_wave(&WaveSpec { phase_frac: 1.0, ..base() }).is_err());
        assert!(gen_wave(&WaveSpec { cycles: 0, ..base() }).is_err());
        assert!(gen_wave(&WaveSpec { channels: vec![], ..base() }).is_err());
        assert!(gen_wave(&WaveSpec { channels: vec![2, 2], ..base() }).is_err());
    }

    #[test]
    fn fig7_shape() {
        let p = preset("fig7_validation").unwrap();
        assert_eq!(p.duration(), 400.0);
        let max_on = |ch: usize| {
            p.commands()
                .filter_map(|c| match *c {
                    Command::SetRegulator { channel, kpa } if channel == ch => Some(kpa),
                    _ => None,
                })
                .fold(0.0, f64::max)
        };
        assert_eq!([1, 2, 3, 4, 5].map(max_on), [0.0, 0.0, 0.0, 30.0, 30.0]);
    }

    #[test]
    fn presets_validate_clean() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert!(validate_program(&p, &Limits::default()).is_empty(), "{name}");
            assert!(!p.is_empty());
        }
        assert_eq!(preset("peristalsis_cut"), preset("peristaltic_cut"));
    }

    #[test]
    fn unknown_preset() {
        assert_eq!(preset("bogus"), Err(PatternError::UnknownPreset("bogus".into())));
    }
}
