//! Line-oriented `.seq` schedule language.
//!
//! ```text
//! program  := (line)* ;  line := [stmt] ['#' comment] EOL
//! stmt     := at | loop
//! at       := 'AT' NUM action
//! action   := 'REG' INT 'SET' NUM | 'VALVE' INT ('OPEN'|'CLOSE') | 'END'
//! loop     := 'LOOP' INT 'PERIOD' NUM '{' (at)* '}'
//! ```
//!
//! Keywords are case-insensitive. Loop bodies may span several lines.

use std::fmt;

use serde::Serialize;

use super::program::{fmt_num, Command, LoopBlock, Program, Timed, TimedItem};

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    /// Absent for whole-program checks.
    pub position: Option<Position>,
    pub message: String,
}

impl Diagnostic {
    pub fn at(position: Position, message: impl Into<String>) -> Self {
        Self {
            position: Some(position),
            message: message.into(),
        }
    }

    pub fn program(message: impl Into<String>) -> Self {
        Self {
            position: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some(p) => write!(f, "{}:{}: {}", p.line, p.column, self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(String),
    Minus,
    Open,
    Close,
    Other(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "'{w}'"),
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Open => f.write_str("'{'"),
            Tok::Close => f.write_str("'}'"),
            Tok::Other(c) => write!(f, "'{c}'"),
        }
    }
}

fn lex(text: &str) -> (Vec<(Tok, Position)>, Vec<Position>) {
    let mut toks = Vec::new();
    let mut ends = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Position {
                line: line_no,
                column: i + 1,
            };
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            let tok = if c.is_ascii_digit() || c == '.' {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                Tok::Num(chars[start..i].iter().collect())
            } else if c.is_alphabetic() || c == '_' {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                Tok::Word(chars[start..i].iter().collect())
            } else {
                i += 1;
                match c {
                    '-' => Tok::Minus,
                    '{' => Tok::Open,
                    '}' => Tok::Close,
                    other => Tok::Other(other),
                }
            };
            toks.push((tok, pos));
            ends.push(Position {
                line: line_no,
                column: i + 1,
            });
        }
    }
    (toks, ends)
}

/// Aborts the current statement; the diagnostic is already recorded.
struct Abort;

struct Parser {
    toks: Vec<(Tok, Position)>,
    ends: Vec<Position>,
    pos: usize,
    end: Position,
    max_channel: Option<usize>,
    diags: Vec<Diagnostic>,
}

type Step<T> = Result<T, Abort>;

impl Parser {
    fn peek(&self) -> Option<&(Tok, Position)> {
        self.toks.get(self.pos)
    }

    fn fail<T>(&mut self, position: Position, message: impl Into<String>) -> Step<T> {
        self.diags.push(Diagnostic::at(position, message));
        Err(Abort)
    }

    /// Reports that `what` was expected at the current token. When the
    /// current token starts a new line the error is placed at the end of the
    /// previous one instead.
    fn expected<T>(&mut self, what: &str) -> Step<T> {
        let prev_end = self.pos.checked_sub(1).map(|i| self.ends[i]);
        match (self.peek().cloned(), prev_end) {
            (Some((_, p)), Some(end)) if p.line > end.line => {
                self.fail(end, format!("expected {what} before end of line"))
            }
            (Some((tok, p)), _) => self.fail(p, format!("expected {what}, found {tok}")),
            (None, Some(end)) => self.fail(end, format!("expected {what} before end of input")),
            (None, None) => {
                let end = self.end;
                self.fail(end, format!("expected {what}, found end of input"))
            }
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some((Tok::Word(w), _)) if w.eq_ignore_ascii_case(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Step<Position> {
        match self.peek().cloned() {
            Some((Tok::Word(w), p)) if w.eq_ignore_ascii_case(kw) => {
                self.pos += 1;
                Ok(p)
            }
            _ => self.expected(kw),
        }
    }

    /// Non-negative decimal. `what` names the value in messages.
    fn number(&mut self, what: &str) -> Step<(f64, Position)> {
        match self.peek().cloned() {
            Some((Tok::Num(text), p)) => {
                self.pos += 1;
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok((v, p)),
                    _ => self.fail(p, format!("invalid number '{text}' for {what}")),
                }
            }
            Some((Tok::Minus, p)) => {
                let shown = match self.toks.get(self.pos + 1) {
                    Some((Tok::Num(n), _)) => format!(" -{n}"),
                    _ => String::new(),
                };
                self.fail(p, format!("negative {what}{shown} not allowed"))
            }
            _ => self.expected(what),
        }
    }

    /// Positive integer.
    fn integer(&mut self, what: &str) -> Step<(u64, Position)> {
        match self.peek().cloned() {
            Some((Tok::Num(text), p)) if !text.contains('.') => {
                self.pos += 1;
                match text.parse::<u64>() {
                    Ok(v) => Ok((v, p)),
                    Err(_) => self.fail(p, format!("{what} '{text}' is too large")),
                }
            }
            Some((Tok::Minus, p)) => self.fail(p, format!("negative {what} not allowed")),
            _ => self.expected(&format!("integer {what}")),
        }
    }

    fn channel(&mut self) -> Step<usize> {
        let (ch, p) = self.integer("channel")?;
        if ch == 0 {
            return self.fail(p, "channel 0 out of range (channels start at 1)");
        }
        match self.max_channel {
            Some(max) if ch > max as u64 => self.fail(p, format!("unknown channel {ch}")),
            _ => Ok(ch as usize),
        }
    }

    fn at_statement(&mut self) -> Step<(Timed, Position)> {
        self.expect_keyword("AT")?;
        let (time, time_pos) = self.number("time")?;
        let command = if self.is_keyword("REG") {
            self.pos += 1;
            let channel = self.channel()?;
            self.expect_keyword("SET")?;
            let (kpa, _) = self.number("setpoint")?;
            Command::SetRegulator { channel, kpa }
        } else if self.is_keyword("VALVE") {
            self.pos += 1;
            let channel = self.channel()?;
            let open = if self.is_keyword("OPEN") {
                true
            } else if self.is_keyword("CLOSE") {
                false
            } else {
                return self.expected("OPEN or CLOSE");
            };
            self.pos += 1;
            Command::SetValve { channel, open }
        } else if self.is_keyword("END") {
            self.pos += 1;
            Command::End
        } else {
            return self.expected("REG, VALVE or END");
        };
        Ok((Timed { time, command }, time_pos))
    }

    fn loop_statement(&mut self) -> Step<LoopBlock> {
        self.expect_keyword("LOOP")?;
        let (count, count_pos) = self.integer("loop count")?;
        if count == 0 {
            return self.fail(count_pos, "loop count must be at least 1");
        }
        let Ok(count) = u32::try_from(count) else {
            return self.fail(count_pos, "loop count is too large");
        };
        self.expect_keyword("PERIOD")?;
        let (period, period_pos) = self.number("period")?;
        if period <= 0.0 {
            return self.fail(period_pos, "period must be > 0");
        }
        match self.peek() {
            Some((Tok::Open, _)) => self.pos += 1,
            _ => return self.expected("'{'"),
        }
        let mut body: Vec<Timed> = Vec::new();
        let mut failed = false;
        loop {
            match self.peek() {
                Some((Tok::Close, _)) => {
                    self.pos += 1;
                    break;
                }
                None => {
                    let end = self.end;
                    return self.fail(end, "unterminated loop: expected '}'");
                }
                Some(_) => {}
            }
            let start = self.pos;
            let Ok((at, p)) = self.at_statement() else {
                failed = true;
                self.recover(start, true);
                continue;
            };
            if at.time >= period {
                self.diags
                    .push(Diagnostic::at(p, format!("time {} ≥ period {}", fmt_num(at.time), fmt_num(period))));
                failed = true;
            } else if let Some(prev) = body.last().filter(|prev| at.time < prev.time) {
                let msg = format!(
                    "time {} is earlier than the preceding time {}",
                    fmt_num(at.time),
                    fmt_num(prev.time)
                );
                self.diags.push(Diagnostic::at(p, msg));
                failed = true;
            }
            body.push(at);
        }
        if failed {
            return Err(Abort);
        }
        Ok(LoopBlock {
            count,
            period,
            body,
        })
    }

    /// Skips to the first token on a later line, stopping early at `}` when
    /// inside a loop body. Always makes progress past `start`.
    fn recover(&mut self, start: usize, in_loop: bool) {
        if self.pos == start {
            self.pos += 1;
        }
        let line = match self.toks.get(self.pos.saturating_sub(1)) {
            Some((_, p)) => p.line,
            None => return,
        };
        while let Some((tok, p)) = self.peek() {
            if p.line > line || (in_loop && *tok == Tok::Close) {
                break;
            }
            self.pos += 1;
        }
    }

    fn program(&mut self) -> Vec<TimedItem> {
        let mut items = Vec::new();
        let mut cursor: f64 = 0.0;
        while let Some((tok, p)) = self.peek().cloned() {
            let start = self.pos;
            let result = match tok {
                Tok::Word(w) if w.eq_ignore_ascii_case("AT") => self.at_statement().and_then(
                    |(at, p)| {
                        if at.time < cursor {
                            self.fail(
                                p,
                                format!(
                                    "time {} is earlier than the schedule position {}",
                                    fmt_num(at.time),
                                    fmt_num(cursor)
                                ),
                            )
                        } else {
                            Ok(TimedItem::At(at))
                        }
                    },
                ),
                Tok::Word(w) if w.eq_ignore_ascii_case("LOOP") => {
                    self.loop_statement().map(TimedItem::Loop)
                }
                other => self.fail(p, format!("expected AT or LOOP, found {other}")),
            };
            match result {
                Ok(item) => {
                    cursor = match &item {
                        TimedItem::At(at) => cursor.max(at.time),
                        TimedItem::Loop(lp) => cursor + lp.count as f64 * lp.period,
                    };
                    items.push(item);
                }
                Err(Abort) => self.recover(start, false),
            }
        }
        items
    }
}

/// Parses a schedule. Channel numbers are only checked to be ≥ 1.
pub fn parse_program(text: &str) -> Result<Program, Vec<Diagnostic>> {
    parse(text, None)
}

/// Parses a schedule for a rig with `n_channels` channels; larger channel
/// numbers are reported at their source position.
pub fn parse_program_for(text: &str, n_channels: usize) -> Result<Program, Vec<Diagnostic>> {
    parse(text, Some(n_channels))
}

fn parse(text: &str, max_channel: Option<usize>) -> Result<Program, Vec<Diagnostic>> {
    let line_count = text.lines().count().max(1);
    let end = Position {
        line: line_count,
        column: text.lines().last().map_or(0, |l| l.chars().count()) + 1,
    };
    let (toks, ends) = lex(text);
    let mut parser = Parser {
        toks,
        ends,
        pos: 0,
        end,
        max_channel,
        diags: Vec::new(),
    };
    let items = parser.program();
    if parser.diags.is_empty() {
        Ok(Program::new(items))
    } else {
        Err(parser.diags)
    }
}
