//! Newline-delimited JSON frames exchanged with console clients.
//!
//! Every request carries a client-chosen `id` that is echoed in the matching
//! `ack` or `err`. Telemetry frames are unsolicited.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::daq::{SampleBatch, Summary, TerminalConfig};

/// Longest accepted frame in bytes, newline excluded.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

pub const REQUEST_TAGS: [&str; 10] = [
    "hello",
    "configure",
    "set_reg",
    "set_valve",
    "load_program",
    "run",
    "stop",
    "daq_start",
    "daq_stop",
    "status_req",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Request {
    Hello {
        id: u64,
        #[serde(default)]
        client: Option<String>,
    },
    /// Acquisition settings; absent fields keep their current value.
    Configure {
        id: u64,
        #[serde(default)]
        csv_path: Option<String>,
        #[serde(default)]
        sample_rate: Option<u32>,
        #[serde(default)]
        terminal_config: Option<TerminalConfig>,
        #[serde(default)]
        channel_ids: Option<Vec<String>>,
    },
    SetReg {
        id: u64,
        ch: usize,
        kpa: f64,
    },
    SetValve {
        id: u64,
        ch: usize,
        open: bool,
    },
    /// Either `.seq` source in `text` or a built-in `preset` name.
    LoadProgram {
        id: u64,
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        preset: Option<String>,
    },
    /// Starts the loaded program. In fast clock mode `duration` keeps the
    /// simulation advancing for that many seconds even past the program end.
    Run {
        id: u64,
        #[serde(default)]
        duration: Option<f64>,
    },
    Stop {
        id: u64,
    },
    DaqStart {
        id: u64,
    },
    DaqStop {
        id: u64,
    },
    StatusReq {
        id: u64,
    },
}

impl Request {
    pub fn id(&self) -> u64 {
        match *self {
            Request::Hello { id, .. }
            | Request::Configure { id, .. }
            | Request::SetReg { id, .. }
            | Request::SetValve { id, .. }
            | Request::LoadProgram { id, .. }
            | Request::Run { id, .. }
            | Request::Stop { id }
            | Request::DaqStart { id }
            | Request::DaqStop { id }
            | Request::StatusReq { id } => id,
        }
    }
}

/// Mirror of the rig for console displays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id: Option<u64>,
    pub sim_time: f64,
    pub stage: String,
    pub supply_enabled: bool,
    /// kPa gauge.
    pub supply_kpa: f64,
    pub setpoints: Vec<f64>,
    pub valves: Vec<bool>,
    /// True actuator pressures, kPa gauge.
    pub gauges: Vec<f64>,
    pub program_loaded: bool,
    pub program_running: bool,
    pub daq_active: bool,
    pub rows_written: u64,
    pub clock: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Reply {
    Ack {
        id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        loaded: Option<bool>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        diagnostics: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        warnings: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summary: Option<SummaryFrame>,
    },
    Err {
        id: Option<u64>,
        msg: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        diagnostics: Vec<String>,
    },
    State(StateFrame),
    Telemetry {
        t0: f64,
        dt: f64,
        rows: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryFrame {
    pub rows_written: u64,
    pub duration: f64,
}

impl From<Summary> for SummaryFrame {
    fn from(s: Summary) -> Self {
        Self {
            rows_written: s.rows_written,
            duration: s.duration,
        }
    }
}

impl Reply {
    pub fn ack(id: u64) -> Self {
        Reply::Ack {
            id,
            loaded: None,
            diagnostics: Vec::new(),
            warnings: Vec::new(),
            summary: None,
        }
    }

    pub fn err(id: Option<u64>, msg: impl Into<String>) -> Self {
        Reply::Err {
            id,
            msg: msg.into(),
            diagnostics: Vec::new(),
        }
    }

    pub fn telemetry(batch: &SampleBatch) -> Self {
        Reply::Telemetry {
            t0: batch.t0,
            dt: batch.dt_sample,
            rows: batch.rows.clone(),
        }
    }

    /// One line of JSON, without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("reply serializes")
    }
}

/// Decodes one frame. Failures become the `err` reply to send back, with the
/// request id when one could be recovered.
#[allow(clippy::result_large_err)]
pub fn decode_request(line: &[u8]) -> Result<Request, Reply> {
    let text = std::str::from_utf8(line).map_err(|_| Reply::err(None, "invalid utf-8"))?;
    let text = text.trim_end_matches(['\r', '\n']);
    let value: Value =
        serde_json::from_str(text).map_err(|e| Reply::err(None, format!("malformed frame: {e}")))?;
    let Value::Object(map) = &value else {
        return Err(Reply::err(None, "malformed frame: expected an object"));
    };
    let id = map.get("id").and_then(Value::as_u64);
    let tag = match map.get("t") {
        Some(Value::String(tag)) => tag.as_str(),
        Some(_) => return Err(Reply::err(id, "malformed frame: t must be a string")),
        None => return Err(Reply::err(id, "malformed frame: missing t")),
    };
    if !REQUEST_TAGS.contains(&tag) {
        return Err(Reply::err(id, "unknown type"));
    }
    if id.is_none() {
        return Err(Reply::err(None, "missing or invalid id"));
    }
    let tag = tag.to_string();
    serde_json::from_value(value).map_err(|e| Reply::err(id, format!("malformed {tag}: {e}")))
}
