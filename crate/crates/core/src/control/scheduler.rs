use std::sync::Arc;

use super::program::{Command, Program, TimedItem};

/// Slack when comparing due times against a simulation clock built from
/// integer step counts, s.
pub const DUE_EPSILON: f64 = 1e-9;

/// Execution cursor of a running program.
///
/// Commands are emitted exactly once, in program order, as soon as a tick
/// reaches their due time. Late ticks release everything that has become due.
#[derive(Debug, Clone)]
pub struct ExecState {
    program: Arc<Program>,
    started_at: f64,
    running: bool,
    item: usize,
    iteration: u32,
    body_index: usize,
    /// Schedule cursor relative to `started_at`.
    cursor: f64,
}

impl ExecState {
    pub fn start(program: Arc<Program>, started_at: f64) -> Self {
        Self {
            program,
            started_at,
            running: true,
            item: 0,
            iteration: 0,
            body_index: 0,
            cursor: 0.0,
        }
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn started_at(&self) -> f64 {
        self.started_at
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    /// Halts without emitting `End`.
    pub fn stop(&mut self) {
        self.running = false;
    }

    /// Absolute simulation time at which the program finishes.
    pub fn end_time(&self) -> f64 {
        self.started_at + self.program.duration()
    }

    /// Returns every not-yet-emitted command due at or before `sim_time`.
    /// After the last item, emits a final `End` once the schedule cursor is
    /// reached and stops.
    pub fn tick(&mut self, sim_time: f64) -> Vec<Command> {
        let mut out = Vec::new();
        if !self.running {
            return out;
        }
        let now = sim_time - self.started_at + DUE_EPSILON;
        let program = Arc::clone(&self.program);
        while self.running {
            let Some(item) = program.items.get(self.item) else {
                if self.cursor <= now {
                    out.push(Command::End);
                    self.running = false;
                }
                break;
            };
            match item {
                TimedItem::At(at) => {
                    if at.time > now {
                        break;
                    }
                    out.push(at.command);
                    self.cursor = self.cursor.max(at.time);
                    self.item += 1;
                    if at.command == Command::End {
                        self.running = false;
                    }
                }
                TimedItem::Loop(lp) => {
                    if self.iteration >= lp.count {
                        self.cursor += lp.count as f64 * lp.period;
                        self.item += 1;
                        self.iteration = 0;
                        self.body_index = 0;
                        continue;
                    }
                    let Some(at) = lp.body.get(self.body_index) else {
                        self.iteration += 1;
                        self.body_index = 0;
                        continue;
                    };
                    let due = self.cursor + self.iteration as f64 * lp.period + at.time;
                    if due > now {
                        break;
                    }
                    out.push(at.command);
                    self.body_index += 1;
                    if at.command == Command::End {
                        self.running = false;
                    }
                }
            }
        }
        out
    }
}
