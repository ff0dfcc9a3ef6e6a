use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

/// One actuation command routed to the rig.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Command {
    /// Regulator setpoint in kPa gauge on a 1-based channel.
    SetRegulator { channel: usize, kpa: f64 },
    /// Release valve state on a 1-based channel; `open` means energized.
    SetValve { channel: usize, open: bool },
    End,
}

impl Command {
    pub fn channel(&self) -> Option<usize> {
        match *self {
            Command::SetRegulator { channel, .. } | Command::SetValve { channel, .. } => {
                Some(channel)
            }
            Command::End => None,
        }
    }
}

/// A command with its due time in seconds. At top level the time is measured
/// from program start; inside a loop body it is relative to the start of the
/// current iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timed {
    pub time: f64,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopBlock {
    pub count: u32,
    pub period: f64,
    pub body: Vec<Timed>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimedItem {
    At(Timed),
    Loop(LoopBlock),
}

/// A parsed control schedule.
///
/// Items run in order against a schedule cursor: `AT t` fires at absolute
/// time `t` and moves the cursor to `t`; a loop starts at the cursor and
/// moves it to the end of its last period. The program ends when the cursor
/// reaches its final position.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Program {
    pub items: Vec<TimedItem>,
}

impl Program {
    pub fn new(items: Vec<TimedItem>) -> Self {
        Self { items }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Program length in seconds: the final cursor position.
    pub fn duration(&self) -> f64 {
        self.items.iter().fold(0.0, |cursor: f64, item| match item {
            TimedItem::At(at) => cursor.max(at.time),
            TimedItem::Loop(lp) => cursor + lp.count as f64 * lp.period,
        })
    }

    /// Every command with its absolute due time, loops fully expanded.
    pub fn expand(&self) -> Vec<(f64, Command)> {
        let mut out = Vec::new();
        let mut cursor: f64 = 0.0;
        for item in &self.items {
            match item {
                TimedItem::At(at) => {
                    out.push((at.time, at.command));
                    cursor = cursor.max(at.time);
                }
                TimedItem::Loop(lp) => {
                    for i in 0..lp.count {
                        let base = cursor + i as f64 * lp.period;
                        out.extend(lp.body.iter().map(|at| (base + at.time, at.command)));
                    }
                    cursor += lp.count as f64 * lp.period;
                }
            }
        }
        out
    }

    /// Every command appearing in the program text, loop bodies once each.
    pub fn commands(&self) -> impl Iterator<Item = &Command> {
        self.items.iter().flat_map(|item| -> Box<dyn Iterator<Item = &Command>> {
            match item {
                TimedItem::At(at) => Box::new(std::iter::once(&at.command)),
                TimedItem::Loop(lp) => Box::new(lp.body.iter().map(|at| &at.command)),
            }
        })
    }

    /// Canonical text form: upper-case keywords, one statement per line,
    /// loop bodies indented by four spaces.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            match item {
                TimedItem::At(at) => {
                    let _ = writeln!(out, "{at}");
                }
                TimedItem::Loop(lp) => {
                    let _ = writeln!(out, "LOOP {} PERIOD {} {{", lp.count, fmt_num(lp.period));
                    for at in &lp.body {
                        let _ = writeln!(out, "    {at}");
                    }
                    out.push_str("}\n");
                }
            }
        }
        out
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Display for Timed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AT {} {}", fmt_num(self.time), self.command)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Command::SetRegulator { channel, kpa } => write!(f, "REG {channel} SET {}", fmt_num(kpa)),
            Command::SetValve { channel, open } => {
                write!(f, "VALVE {channel} {}", if open { "OPEN" } else { "CLOSE" })
            }
            Command::End => f.write_str("END"),
        }
    }
}

/// Shortest round-trip decimal with at least one fractional digit.
pub(crate) fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    let s = x.to_string();
    if s.contains('.') {
        s
    } else {
        s + ".0"
    }
}

/// Shorthand for building programs in code.
pub fn at(time: f64, command: Command) -> Timed {
    Timed { time, command }
}

pub fn reg(channel: usize, kpa: f64) -> Command {
    Command::SetRegulator { channel, kpa }
}

pub fn valve(channel: usize, open: bool) -> Command {
    Command::SetValve { channel, open }
}
