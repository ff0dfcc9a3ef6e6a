use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Line-protocol client with a read deadline per frame.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    pub fn connect(addr: SocketAddr) -> Self {
        let stream = TcpStream::connect(addr).expect("connect");
        stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        let writer = stream.try_clone().unwrap();
        Self {
            reader: BufReader::new(stream),
            writer,
        }
    }

    pub fn send(&mut self, line: &str) {
        self.writer.write_all(line.as_bytes()).unwrap();
        self.writer.write_all(b"\n").unwrap();
    }

    pub fn send_raw(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.writer.write_all(bytes)
    }

    pub fn writer(&self) -> TcpStream {
        self.writer.try_clone().unwrap()
    }

    /// Next frame, or `None` on disconnect or timeout.
    pub fn next(&mut self) -> Option<Value> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(serde_json::from_str(&line).expect("server frames are JSON")),
        }
    }

    /// Collects frames up to and including the first one matching `done`.
    pub fn until(&mut self, mut done: impl FnMut(&Value) -> bool) -> Vec<Value> {
        let mut frames = Vec::new();
        loop {
            let frame = self.next().expect("frame before timeout");
            let stop = done(&frame);
            frames.push(frame);
            if stop {
                return frames;
            }
        }
    }

    /// Sends a request and returns frames through its `ack`/`err` and, for
    /// acks, the following state frame.
    pub fn request(&mut self, line: &str) -> Vec<Value> {
        let id = serde_json::from_str::<Value>(line).unwrap()["id"].clone();
        self.send(line);
        let mut frames = self.until(|f| (f["t"] == "ack" || f["t"] == "err") && f["id"] == id);
        if frames.last().unwrap()["t"] == "ack" {
            frames.extend(self.until(|f| f["t"] == "state" && f["id"] == id));
        }
        frames
    }

    pub fn status(&mut self, id: u64) -> Value {
        self.send(&format!(r#"{{"t":"status_req","id":{id}}}"#));
        self.until(|f| f["t"] == "state" && f["id"] == id).pop().unwrap()
    }
}

pub fn frame_type(v: &Value) -> &str {
    v["t"].as_str().unwrap_or("")
}

#[derive(Debug, Default)]
pub struct FuzzReport {
    pub lines: usize,
    pub replies: usize,
    pub non_err: Vec<Value>,
    pub disconnects: usize,
    pub alive_after: bool,
}

/// Sends `n` lines of random bytes (no newline inside) and checks what comes
/// back. Empty lines get no reply; every other line gets exactly one `err`
/// unless the connection drops, in which case the fuzzer reconnects.
pub fn fuzz_random_lines(addr: SocketAddr, n: usize, seed: u64) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FuzzReport::default();
    let lines: Vec<Vec<u8>> = (0..n)
        .map(|_| {
            let len = rng.random_range(0..160);
            (0..len)
                .map(|_| loop {
                    let b: u8 = rng.random();
                    if b != b'\n' {
                        break b;
                    }
                })
                .collect()
        })
        .collect();
    report.lines = lines.len();
    let expected: usize = lines
        .iter()
        .filter(|l| !(l.is_empty() || l.as_slice() == b"\r"))
        .count();

    let mut client = Client::connect(addr);
    let mut writer = client.writer();
    let sender = std::thread::spawn(move || {
        for chunk in lines.chunks(256) {
            let mut buf = Vec::new();
            for line in chunk {
                buf.extend_from_slice(line);
                buf.push(b'\n');
            }
            if writer.write_all(&buf).is_err() {
                return false;
            }
        }
        true
    });
    let deadline = Instant::now() + Duration::from_secs(120);
    while report.replies < expected && Instant::now() < deadline {
        match client.next() {
            Some(frame) => {
                report.replies += 1;
                if frame_type(&frame) != "err" {
                    report.non_err.push(frame);
                }
            }
            None => {
                report.disconnects += 1;
                break;
            }
        }
    }
    let _ = sender.join();

    let mut probe = Client::connect(addr);
    let state = probe.status(424_242);
    report.alive_after = frame_type(&state) == "state";
    report
}
