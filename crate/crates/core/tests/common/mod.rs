#![allow(dead_code)]

pub mod wire;

use std::sync::Arc;

use proptest::prelude::*;

use pouch_rig::control::{Command, ExecState, LoopBlock, Program, Timed, TimedItem, DUE_EPSILON};

/// Times on a 1/16 s grid add exactly, so expanded due times never tie by
/// rounding.
fn grid_time(max_sixteenths: u32) -> impl Strategy<Value = f64> {
    (0..=max_sixteenths).prop_map(|n| n as f64 / 16.0)
}

fn any_time(max: f64) -> impl Strategy<Value = f64> {
    prop_oneof![
        3 => 0.0..max,
        1 => (0u32..2000).prop_map(|n| n as f64 / 10.0),
        1 => Just(0.0),
    ]
}

fn action(allow_end: bool) -> impl Strategy<Value = Command> {
    let kpa = prop_oneof![
        2 => 0.0..500.0f64,
        1 => (0u32..=50).prop_map(|n| n as f64 * 10.0),
    ];
    let reg = (1usize..=5, kpa).prop_map(|(channel, kpa)| Command::SetRegulator { channel, kpa });
    let valve = (1usize..=5, any::<bool>()).prop_map(|(channel, open)| Command::SetValve { channel, open });
    if allow_end {
        prop_oneof![8 => reg, 8 => valve, 1 => Just(Command::End)].boxed()
    } else {
        prop_oneof![reg, valve].boxed()
    }
}

#[derive(Debug, Clone)]
enum Draft {
    At(f64, Command),
    Loop(u32, f64, Vec<(f64, Command)>),
}

fn draft(grid: bool) -> impl Strategy<Value = Draft> {
    let step = if grid { grid_time(64).boxed() } else { any_time(20.0).boxed() };
    let period = if grid {
        (1u32..=64).prop_map(|n| n as f64 / 16.0).boxed()
    } else {
        prop_oneof![0.001..30.0f64, (1u32..300).prop_map(|n| n as f64 / 10.0)].boxed()
    };
    prop_oneof![
        3 => (step, action(true)).prop_map(|(dt, c)| Draft::At(dt, c)),
        1 => (1u32..=5, period, prop::collection::vec((0.0..1.0f64, action(false)), 0..6))
            .prop_map(move |(count, period, body)| {
                let mut body: Vec<(f64, Command)> = body
                    .into_iter()
                    .map(|(frac, c)| {
                        let t = if grid {
                            (frac * period * 16.0).floor() / 16.0
                        } else {
                            frac * period
                        };
                        (t, c)
                    })
                    .filter(|(t, _)| *t < period)
                    .collect();
                body.sort_by(|a, b| a.0.total_cmp(&b.0));
                Draft::Loop(count, period, body)
            }),
    ]
}

fn assemble(drafts: Vec<Draft>) -> Program {
    let mut cursor = 0.0;
    let mut items = Vec::new();
    for d in drafts {
        match d {
            Draft::At(dt, command) => {
                cursor += dt;
                items.push(TimedItem::At(Timed { time: cursor, command }));
            }
            Draft::Loop(count, period, body) => {
                items.push(TimedItem::Loop(LoopBlock {
                    count,
                    period,
                    body: body
                        .into_iter()
                        .map(|(time, command)| Timed { time, command })
                        .collect(),
                }));
                cursor += count as f64 * period;
            }
        }
    }
    Program::new(items)
}

/// Well-formed programs over five channels with arbitrary decimal values.
pub fn program() -> impl Strategy<Value = Program> {
    prop::collection::vec(draft(false), 0..12).prop_map(assemble)
}

/// Well-formed programs whose times are exact binary fractions.
pub fn grid_program() -> impl Strategy<Value = Program> {
    prop::collection::vec(draft(true), 0..12).prop_map(assemble)
}

/// Strictly increasing tick times with gaps from zero to a few seconds,
/// sometimes landing exactly on the 1/16 s grid.
pub fn cadence() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![
            2 => 0.0001..3.0f64,
            1 => (1u32..48).prop_map(|n| n as f64 / 16.0),
        ],
        1..400,
    )
}

/// What a scheduler must emit: every expanded command up to and including
/// the first explicit `End`, or a closing `End` at the program duration.
pub fn expected_emissions(program: &Program) -> Vec<(f64, Command)> {
    let mut out = Vec::new();
    for (t, c) in program.expand() {
        out.push((t, c));
        if c == Command::End {
            return out;
        }
    }
    out.push((program.duration(), Command::End));
    out
}

/// Drives `program` at the given tick gaps and checks that every command
/// is emitted exactly once, in order, at the first tick at or after its due
/// time.
pub fn check_ticks(program: &Program, start: f64, gaps: &[f64]) -> Result<(), String> {
    let expected = expected_emissions(program);
    let mut exec = ExecState::start(Arc::new(program.clone()), start);
    let mut emitted: Vec<(f64, Command)> = Vec::new();
    let mut now = start;
    let mut prev = f64::NEG_INFINITY;
    let mut gaps = gaps.iter().cycle();
    let horizon = start + program.duration() + 10.0;
    while exec.is_running() {
        for c in exec.tick(now) {
            let i = emitted.len();
            let Some(&(due, want)) = expected.get(i) else {
                return Err(format!("extra emission {c:?} at {now}"));
            };
            if c != want {
                return Err(format!("emission {i}: got {c:?}, want {want:?}"));
            }
            let rel_now = now - start + DUE_EPSILON;
            let rel_prev = prev - start + DUE_EPSILON;
            if due > rel_now {
                return Err(format!("emission {i} ({c:?}) due {due} released early at {now}"));
            }
            if due <= rel_prev {
                return Err(format!("emission {i} ({c:?}) due {due} held past tick {prev}"));
            }
            emitted.push((now, c));
        }
        if now > horizon {
            return Err(format!("still running at {now}"));
        }
        prev = now;
        now += gaps.next().copied().unwrap_or(1.0);
    }
    if emitted.len() != expected.len() {
        return Err(format!("emitted {} of {}", emitted.len(), expected.len()));
    }
    if !exec.tick(now + 100.0).is_empty() {
        return Err("emission after stop".into());
    }
    Ok(())
}

/// Re-spells canonical text with lower-case keywords, extra blanks and
/// comments, which must not change the parse.
pub fn respell(text: &str, variant: u8) -> String {
    let mut out = String::new();
    if variant & 1 == 1 {
        out.push_str("# generated\n\n");
    }
    for line in text.lines() {
        let mut line = line.to_string();
        if variant & 2 == 2 {
            line = line.to_lowercase();
        }
        if variant & 4 == 4 {
            line = line.replace(' ', "   ").replace('\t', " ");
            line.insert(0, '\t');
        }
        if variant & 8 == 8 {
            line.push_str("  # note");
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}
