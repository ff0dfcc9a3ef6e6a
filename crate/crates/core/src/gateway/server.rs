use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender, TryRecvError, TrySendError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::config::{ClockMode, RigConfig};
use super::protocol::{decode_request, Reply, Request, MAX_FRAME_BYTES};
use super::rig::{startup_sequence, Effect, Rig, StartupError};
use crate::daq::Subscription;

const IDLE_POLL: Duration = Duration::from_millis(20);
const INBOUND_CAPACITY: usize = 1024;
/// Reply lines queued per client before it counts as stalled and is dropped.
const OUTBOUND_CAPACITY: usize = 4096;
/// Longest stretch of simulated time a realtime rig catches up in one go.
const MAX_CATCH_UP: Duration = Duration::from_millis(250);

type ConnId = u64;

enum Inbound {
    Connect {
        conn: ConnId,
        stream: TcpStream,
        out: SyncSender<Outbound>,
    },
    Request {
        conn: ConnId,
        request: Request,
    },
    Disconnect {
        conn: ConnId,
    },
}

enum Outbound {
    Line(String),
    Telemetry(Subscription),
}

struct Client {
    stream: TcpStream,
    out: SyncSender<Outbound>,
}

impl Client {
    /// Queues without blocking; a stalled client is disconnected.
    fn send(&self, msg: Outbound) {
        if let Err(TrySendError::Full(_)) = self.out.try_send(msg) {
            let _ = self.stream.shutdown(Shutdown::Both);
        }
    }
}

/// A running server. Dropping it shuts the server down.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Startup(#[from] StartupError),
    #[error("cannot listen on port {port}: {source}")]
    Bind {
        port: u16,
        #[source]
        source: io::Error,
    },
}

/// Brings the rig up and serves the line protocol on `127.0.0.1:port`
/// (port 0 picks a free one).
pub fn serve(config: RigConfig, port: u16) -> Result<ServerHandle, ServeError> {
    let rig = startup_sequence(config)?;
    let bind_err = |source| ServeError::Bind { port, source };
    let listener = TcpListener::bind(("127.0.0.1", port)).map_err(bind_err)?;
    listener.set_nonblocking(true).map_err(bind_err)?;
    let addr = listener.local_addr().map_err(bind_err)?;
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::sync_channel(INBOUND_CAPACITY);

    let accept = {
        let stop = stop.clone();
        thread::Builder::new()
            .name("rig-accept".into())
            .spawn(move || accept_loop(listener, tx, &stop))
            .expect("spawn accept thread")
    };
    let sim = {
        let stop = stop.clone();
        thread::Builder::new()
            .name("rig-sim".into())
            .spawn(move || SimLoop::new(rig).run(rx, &stop))
            .expect("spawn simulation thread")
    };
    Ok(ServerHandle {
        addr,
        stop,
        threads: vec![accept, sim],
    })
}

fn accept_loop(listener: TcpListener, inbound: SyncSender<Inbound>, stop: &AtomicBool) {
    let mut next_conn: ConnId = 0;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                next_conn += 1;
                if spawn_connection(next_conn, stream, inbound.clone()).is_err() {
                    continue;
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(IDLE_POLL),
            Err(_) => thread::sleep(IDLE_POLL),
        }
    }
}

fn spawn_connection(conn: ConnId, stream: TcpStream, inbound: SyncSender<Inbound>) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let (out_tx, out_rx) = mpsc::sync_channel(OUTBOUND_CAPACITY);
    let writer_stream = stream.try_clone()?;
    let reader_stream = stream.try_clone()?;
    if inbound
        .send(Inbound::Connect {
            conn,
            stream,
            out: out_tx.clone(),
        })
        .is_err()
    {
        return Ok(());
    }
    thread::Builder::new()
        .name(format!("rig-write-{conn}"))
        .spawn(move || writer_loop(writer_stream, out_rx))?;
    thread::Builder::new()
        .name(format!("rig-read-{conn}"))
        .spawn(move || reader_loop(conn, reader_stream, inbound, out_tx))?;
    Ok(())
}

/// Reads one frame into `buf`. Returns `Ok(false)` at end of stream and
/// `Err(len)` for a frame longer than the limit, which is skipped.
fn read_frame(reader: &mut impl BufRead, buf: &mut Vec<u8>) -> io::Result<Result<bool, usize>> {
    buf.clear();
    let n = reader
        .by_ref()
        .take(MAX_FRAME_BYTES as u64 + 1)
        .read_until(b'\n', buf)?;
    if n == 0 {
        return Ok(Ok(false));
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
        return Ok(Ok(true));
    }
    if buf.len() <= MAX_FRAME_BYTES {
        // final line without newline
        return Ok(Ok(true));
    }
    let mut len = buf.len();
    loop {
        let chunk = reader.fill_buf()?;
        if chunk.is_empty() {
            return Ok(Err(len));
        }
        match chunk.iter().position(|&b| b == b'\n') {
            Some(i) => {
                reader.consume(i + 1);
                return Ok(Err(len + i));
            }
            None => {
                len += chunk.len();
                let n = chunk.len();
                reader.consume(n);
            }
        }
    }
}

fn reader_loop(
    conn: ConnId,
    stream: TcpStream,
    inbound: SyncSender<Inbound>,
    out: SyncSender<Outbound>,
) {
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        match read_frame(&mut reader, &mut buf) {
            Ok(Ok(true)) => {
                if buf.is_empty() || buf == b"\r" {
                    continue;
                }
                match decode_request(&buf) {
                    Ok(request) => {
                        if inbound.send(Inbound::Request { conn, request }).is_err() {
                            break;
                        }
                    }
                    Err(reply) => {
                        if out.send(Outbound::Line(reply.encode())).is_err() {
                            break;
                        }
                    }
                }
            }
            Ok(Err(len)) => {
                let reply = Reply::err(None, format!("frame too long ({len} bytes)"));
                if out.send(Outbound::Line(reply.encode())).is_err() {
                    break;
                }
            }
            Ok(Ok(false)) | Err(_) => break,
        }
    }
    let _ = inbound.send(Inbound::Disconnect { conn });
}

fn write_telemetry(w: &mut impl Write, subs: &mut Vec<Subscription>) -> io::Result<()> {
    for sub in subs.iter() {
        for batch in sub.drain() {
            writeln!(w, "{}", Reply::telemetry(&batch).encode())?;
        }
    }
    subs.retain(|s| !s.is_finished());
    Ok(())
}

fn writer_loop(stream: TcpStream, out: Receiver<Outbound>) {
    let mut w = io::BufWriter::new(stream);
    let mut subs: Vec<Subscription> = Vec::new();
    loop {
        let next = out.recv_timeout(IDLE_POLL);
        let result = match next {
            Ok(Outbound::Line(line)) => write_telemetry(&mut w, &mut subs)
                .and_then(|_| writeln!(w, "{line}"))
                .and_then(|_| w.flush()),
            Ok(Outbound::Telemetry(sub)) => {
                subs.push(sub);
                Ok(())
            }
            Err(RecvTimeoutError::Timeout) => write_telemetry(&mut w, &mut subs).and_then(|_| w.flush()),
            Err(RecvTimeoutError::Disconnected) => {
                let _ = write_telemetry(&mut w, &mut subs).and_then(|_| w.flush());
                break;
            }
        };
        if result.is_err() {
            break;
        }
    }
}

/// Owner of the rig: applies requests between steps and advances time.
struct SimLoop {
    rig: Rig,
    clients: BTreeMap<ConnId, Client>,
    /// Step count at which a fast-clock run ends.
    run_target: Option<u64>,
    /// Wall-clock anchor for realtime pacing: (instant, steps at that instant).
    anchor: Option<(Instant, u64)>,
}

impl SimLoop {
    fn new(rig: Rig) -> Self {
        Self {
            rig,
            clients: BTreeMap::new(),
            run_target: None,
            anchor: None,
        }
    }

    fn run(mut self, inbound: Receiver<Inbound>, stop: &AtomicBool) {
        while !stop.load(Ordering::SeqCst) {
            let busy = match self.rig.config().clock_mode {
                ClockMode::Fast => self.fast_tick(),
                ClockMode::Realtime => self.realtime_tick(),
            };
            let disconnected = if busy {
                loop {
                    match inbound.try_recv() {
                        Ok(msg) => self.dispatch(msg),
                        Err(TryRecvError::Empty) => break false,
                        Err(TryRecvError::Disconnected) => break true,
                    }
                }
            } else {
                let wait = match self.rig.config().clock_mode {
                    ClockMode::Fast => IDLE_POLL,
                    ClockMode::Realtime => Duration::from_secs_f64(self.rig.config().plant.dt),
                };
                match inbound.recv_timeout(wait) {
                    Ok(msg) => {
                        self.dispatch(msg);
                        false
                    }
                    Err(RecvTimeoutError::Timeout) => false,
                    Err(RecvTimeoutError::Disconnected) => true,
                }
            };
            if disconnected && self.clients.is_empty() && stop.load(Ordering::SeqCst) {
                break;
            }
        }
        let _ = self.rig.stop_acquisition();
        for client in self.clients.values() {
            let _ = client.stream.shutdown(Shutdown::Both);
        }
    }

    /// Advances one step if a run is pending. Returns whether it did.
    fn fast_tick(&mut self) -> bool {
        let Some(target) = self.run_target else {
            return false;
        };
        if self.rig.plant().steps() < target {
            self.step();
            return true;
        }
        self.run_target = None;
        if let Err(e) = self.rig.settle() {
            self.broadcast(&Reply::err(None, e.to_string()));
        }
        self.broadcast(&Reply::State(self.rig.status(None)));
        false
    }

    /// Catches simulation time up with wall time. Returns whether it stepped.
    fn realtime_tick(&mut self) -> bool {
        let dt = self.rig.config().plant.dt;
        let now = Instant::now();
        let (t0, s0) = *self.anchor.get_or_insert((now, self.rig.plant().steps()));
        let due = s0 + (now.duration_since(t0).as_secs_f64() / dt) as u64;
        let steps = self.rig.plant().steps();
        if due <= steps {
            return false;
        }
        let max_batch = (MAX_CATCH_UP.as_secs_f64() / dt).max(1.0) as u64;
        if due - steps > max_batch {
            // fell too far behind: drop the backlog rather than spiral
            self.anchor = Some((now, steps));
        }
        for _ in 0..(due - steps).min(max_batch) {
            self.step();
        }
        true
    }

    fn step(&mut self) {
        let was_running = self.rig.is_running();
        if let Err(e) = self.rig.step() {
            self.broadcast(&Reply::err(None, e.to_string()));
            let _ = self.rig.stop_acquisition();
        }
        if was_running
            && !self.rig.is_running()
            && self.rig.config().clock_mode == ClockMode::Realtime
        {
            self.broadcast(&Reply::State(self.rig.status(None)));
        }
    }

    fn broadcast(&self, reply: &Reply) {
        let line = reply.encode();
        for client in self.clients.values() {
            client.send(Outbound::Line(line.clone()));
        }
    }

    fn subscribe(&mut self, conn: ConnId) {
        if let Some(sub) = self.rig.subscribe() {
            if let Some(client) = self.clients.get(&conn) {
                client.send(Outbound::Telemetry(sub));
            }
        }
    }

    fn dispatch(&mut self, msg: Inbound) {
        match msg {
            Inbound::Connect { conn, stream, out } => {
                self.clients.insert(conn, Client { stream, out });
                if self.rig.acquisition_active() {
                    self.subscribe(conn);
                }
            }
            Inbound::Disconnect { conn } => {
                if let Some(client) = self.clients.remove(&conn) {
                    let _ = client.stream.shutdown(Shutdown::Both);
                }
            }
            Inbound::Request { conn, request } => {
                let handled = self.rig.handle_message(request);
                for effect in &handled.effects {
                    match *effect {
                        Effect::AcquisitionStarted => {
                            let conns: Vec<ConnId> = self.clients.keys().copied().collect();
                            for c in conns {
                                self.subscribe(c);
                            }
                        }
                        Effect::ProgramStarted { run_for } => {
                            let dt = self.rig.config().plant.dt;
                            let seconds = run_for
                                .or_else(|| self.rig.program().map(|p| p.duration()))
                                .unwrap_or(0.0);
                            self.run_target =
                                Some(self.rig.plant().steps() + (seconds / dt).round() as u64);
                        }
                        Effect::ProgramStopped => self.run_target = None,
                        Effect::AcquisitionStopped => {}
                    }
                }
                if let Some(client) = self.clients.get(&conn) {
                    for reply in &handled.replies {
                        client.send(Outbound::Line(reply.encode()));
                    }
                }
            }
        }
    }
}
