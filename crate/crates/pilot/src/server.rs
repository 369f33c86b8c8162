//! TCP service: one engine thread, one reader and one writer thread per
//! session.
//!
//! Everything that touches the engine goes through a single command queue
//! that the engine thread drains at the start of every tick, in arrival
//! order. The engine thread never blocks on a socket. Replies go through an
//! unbounded per-session queue, while state frames are dropped for a session
//! that already has [`MAX_QUEUED_FRAMES`] unsent frames.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use thiserror::Error;

use exo_gait::engine::{Engine, EngineConfig};
use exo_gait::error::EngineError;
use exo_gait::planner::Behavior;

use crate::protocol::{
    decode_command, encode, ClientMessage, ErrorCode, HelloMessage, Role, ServerMessage, StateMessage,
};

pub const DEFAULT_RATE_HZ: f64 = 50.0;
pub const MAX_QUEUED_FRAMES: usize = 8;
pub const MAX_LINE_BYTES: usize = 64 * 1024;
const ACCEPT_POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stream rate must be positive, got {0} Hz")]
    BadRate(f64),
    #[error("time scale must be positive, got {0}")]
    BadTimeScale(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: String,
    pub rate_hz: f64,
    pub engine: EngineConfig,
    /// Engine seconds per wall-clock second. 1 is real time.
    pub time_scale: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:7878".into(),
            rate_hz: DEFAULT_RATE_HZ,
            engine: EngineConfig::default(),
            time_scale: 1.0,
        }
    }
}

type SessionId = u64;

enum Command {
    Connect {
        id: SessionId,
        tx: Sender<Outgoing>,
        frames: Arc<AtomicUsize>,
        socket: TcpStream,
    },
    Disconnect(SessionId),
    Client(SessionId, ClientMessage),
}

enum Outgoing {
    Reply(String),
    Frame(String),
}

struct Session {
    tx: Sender<Outgoing>,
    frames: Arc<AtomicUsize>,
    /// Closed when the service stops so the session threads wind down.
    socket: TcpStream,
}

/// A running service. Dropping the handle stops it.
pub struct ServiceHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    /// Block until the service stops (it only stops on shutdown).
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

pub fn serve(config: ServiceConfig) -> Result<ServiceHandle, ServeError> {
    if !(config.rate_hz > 0.0) {
        return Err(ServeError::BadRate(config.rate_hz));
    }
    if !(config.time_scale > 0.0) {
        return Err(ServeError::BadTimeScale(config.time_scale));
    }
    let engine = Engine::new(config.engine.clone())?;
    let bind_err = |source| ServeError::BindFailure {
        addr: config.bind.clone(),
        source,
    };
    let addrs: Vec<SocketAddr> = config.bind.to_socket_addrs().map_err(bind_err)?.collect();
    let listener = TcpListener::bind(&addrs[..]).map_err(bind_err)?;
    listener.set_nonblocking(true).map_err(bind_err)?;
    let addr = listener.local_addr().map_err(bind_err)?;
    info!("pilot service listening on {addr}");

    let stop = Arc::new(AtomicBool::new(false));
    let (cmd_tx, cmd_rx) = mpsc::channel();
    let engine_thread = {
        let stop = stop.clone();
        let (rate, scale) = (config.rate_hz, config.time_scale);
        thread::Builder::new()
            .name("engine".into())
            .spawn(move || EngineLoop::new(engine, rate, cmd_rx).run(&stop, scale))
            .expect("spawn engine thread")
    };
    let accept_thread = {
        let stop = stop.clone();
        thread::Builder::new()
            .name("accept".into())
            .spawn(move || accept_loop(listener, cmd_tx, &stop))
            .expect("spawn accept thread")
    };
    Ok(ServiceHandle {
        addr,
        stop,
        threads: vec![accept_thread, engine_thread],
    })
}

fn accept_loop(listener: TcpListener, commands: Sender<Command>, stop: &AtomicBool) {
    let mut next_id: SessionId = 0;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                next_id += 1;
                debug!("session {next_id} connected from {peer}");
                if let Err(e) = start_session(next_id, stream, commands.clone()) {
                    warn!("session {next_id} failed to start: {e}");
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(ACCEPT_POLL);
            }
        }
    }
}

fn start_session(id: SessionId, stream: TcpStream, commands: Sender<Command>) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let reader = stream.try_clone()?;
    let socket = stream.try_clone()?;
    let (tx, rx) = mpsc::channel();
    let frames = Arc::new(AtomicUsize::new(0));
    let _ = commands.send(Command::Connect {
        id,
        tx: tx.clone(),
        frames: frames.clone(),
        socket,
    });
    thread::Builder::new()
        .name(format!("session-{id}-write"))
        .spawn(move || write_loop(stream, rx, &frames))?;
    thread::Builder::new()
        .name(format!("session-{id}-read"))
        .spawn(move || read_loop(id, reader, tx, commands))?;
    Ok(())
}

fn write_loop(mut stream: TcpStream, rx: Receiver<Outgoing>, frames: &AtomicUsize) {
    for msg in rx {
        let line = match msg {
            Outgoing::Reply(line) => line,
            Outgoing::Frame(line) => {
                frames.fetch_sub(1, Ordering::SeqCst);
                line
            }
        };
        if stream.write_all(line.as_bytes()).and_then(|()| stream.write_all(b"\n")).is_err() {
            break;
        }
    }
    let _ = stream.shutdown(std::net::Shutdown::Both);
}

fn read_loop(id: SessionId, stream: TcpStream, replies: Sender<Outgoing>, commands: Sender<Command>) {
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        match reader.by_ref().take(MAX_LINE_BYTES as u64 + 1).read_until(b'\n', &mut buf) {
            Ok(0) | Err(_) => break,
            Ok(_) => {}
        }
        if buf.len() > MAX_LINE_BYTES && buf.last() != Some(&b'\n') {
            let _ = replies.send(Outgoing::Reply(error_line(
                ErrorCode::MalformedMessage,
                format!("line longer than {MAX_LINE_BYTES} bytes"),
            )));
            // drop the rest of the oversized line
            let mut skip = Vec::new();
            if reader.read_until(b'\n', &mut skip).unwrap_or(0) == 0 {
                break;
            }
            continue;
        }
        let line = match std::str::from_utf8(&buf) {
            Ok(s) => s.trim(),
            Err(e) => {
                let _ = replies.send(Outgoing::Reply(error_line(ErrorCode::MalformedMessage, e.to_string())));
                continue;
            }
        };
        if line.is_empty() {
            continue;
        }
        match decode_command(line) {
            Ok(msg) => {
                if commands.send(Command::Client(id, msg)).is_err() {
                    break;
                }
            }
            Err(e) => {
                debug!("session {id}: {e}");
                let _ = replies.send(Outgoing::Reply(encode(&e.reply())));
            }
        }
    }
    debug!("session {id} closed");
    let _ = commands.send(Command::Disconnect(id));
}

fn error_line(code: ErrorCode, message: String) -> String {
    encode(&ServerMessage::Error { code, message })
}

fn engine_error_code(e: &EngineError) -> ErrorCode {
    match e {
        EngineError::BehaviorChangeWhileMoving(_) => ErrorCode::BehaviorChangeWhileMoving,
        EngineError::IncompatibleBehaviorTransition(_) => ErrorCode::IncompatibleTransition,
        EngineError::UnknownParameterSet(_) => ErrorCode::UnknownParameterSet,
        EngineError::NonpositivePeriod(_) => ErrorCode::MalformedMessage,
        EngineError::Plan(_) => ErrorCode::InvalidBehavior,
    }
}

struct EngineLoop {
    engine: Engine,
    rate_hz: f64,
    decimation: u64,
    commands: Receiver<Command>,
    sessions: BTreeMap<SessionId, Session>,
    controller: Option<SessionId>,
}

impl EngineLoop {
    fn new(engine: Engine, rate_hz: f64, commands: Receiver<Command>) -> Self {
        let decimation = ((1.0 / (rate_hz * engine.dt())).round() as u64).max(1);
        Self {
            engine,
            rate_hz,
            decimation,
            commands,
            sessions: BTreeMap::new(),
            controller: None,
        }
    }

    fn run(mut self, stop: &AtomicBool, time_scale: f64) {
        let period = self.engine.dt() / time_scale;
        let start = Instant::now();
        let mut ticks: u64 = 0;
        while !stop.load(Ordering::SeqCst) {
            while let Ok(cmd) = self.commands.try_recv() {
                self.apply(cmd);
            }
            if let Err(e) = self.engine.tick() {
                warn!("step planning failed: {e}");
                if let Some(id) = self.controller {
                    self.reply(id, &ServerMessage::Error {
                        code: ErrorCode::PlanFailed,
                        message: e.to_string(),
                    });
                }
            }
            ticks += 1;
            if ticks % self.decimation == 0 {
                self.broadcast_state();
            }
            let due = start + Duration::from_secs_f64(period * ticks as f64);
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        for s in self.sessions.values() {
            let _ = s.socket.shutdown(std::net::Shutdown::Both);
        }
    }

    fn snapshot(&self) -> ServerMessage {
        ServerMessage::State(StateMessage::new(
            self.engine.state(),
            self.engine.params_name(),
            self.engine.trigger_window_open(),
        ))
    }

    fn broadcast_state(&mut self) {
        let line = encode(&self.snapshot());
        let mut gone = Vec::new();
        for (&id, s) in &self.sessions {
            if s.frames.load(Ordering::SeqCst) >= MAX_QUEUED_FRAMES {
                continue;
            }
            s.frames.fetch_add(1, Ordering::SeqCst);
            if s.tx.send(Outgoing::Frame(line.clone())).is_err() {
                gone.push(id);
            }
        }
        for id in gone {
            self.disconnect(id);
        }
    }

    fn reply(&mut self, id: SessionId, msg: &ServerMessage) {
        let failed = match self.sessions.get(&id) {
            Some(s) => s.tx.send(Outgoing::Reply(encode(msg))).is_err(),
            None => false,
        };
        if failed {
            self.disconnect(id);
        }
    }

    fn hello(&mut self, id: SessionId) {
        let role = if self.controller == Some(id) { Role::Controller } else { Role::Observer };
        let hello = HelloMessage::new(role, self.rate_hz, self.engine.dt(), self.engine.geometry());
        self.reply(id, &ServerMessage::Hello(hello));
    }

    fn disconnect(&mut self, id: SessionId) {
        if self.sessions.remove(&id).is_some() {
            info!("session {id} left");
        }
        if self.controller == Some(id) {
            self.controller = None;
        }
    }

    fn apply(&mut self, cmd: Command) {
        match cmd {
            Command::Connect { id, tx, frames, socket } => {
                self.sessions.insert(id, Session { tx, frames, socket });
                if self.controller.is_none() {
                    self.controller = Some(id);
                }
                info!("session {id} joined");
                let snapshot = self.snapshot();
                self.reply(id, &snapshot);
                self.hello(id);
            }
            Command::Disconnect(id) => self.disconnect(id),
            Command::Client(id, msg) => self.client(id, msg),
        }
    }

    fn client(&mut self, id: SessionId, msg: ClientMessage) {
        if let ClientMessage::Hello { role } = msg {
            match role {
                Some(Role::Controller) if self.controller.is_some_and(|c| c != id) => {
                    self.reply(id, &ServerMessage::Error {
                        code: ErrorCode::ControllerTaken,
                        message: "another session controls the engine; continuing as observer".into(),
                    });
                }
                Some(Role::Controller) => self.controller = Some(id),
                Some(Role::Observer) if self.controller == Some(id) => self.controller = None,
                _ => {}
            }
            self.hello(id);
            return;
        }
        if self.controller != Some(id) {
            self.reply(id, &ServerMessage::Error {
                code: ErrorCode::NotController,
                message: "observers cannot send commands".into(),
            });
            return;
        }
        let reply = match msg {
            ClientMessage::Hello { .. } => unreachable!("handled above"),
            ClientMessage::Trigger { id: tag } => {
                let accepted = self.engine.trigger();
                let s = self.engine.state();
                ServerMessage::TriggerAck {
                    id: tag,
                    accepted,
                    phase: s.phase,
                    step_remaining: s.step_remaining,
                }
            }
            ClientMessage::Behavior { behavior, reorient } => match behavior.parse::<Behavior>() {
                Err(e) => ServerMessage::Error {
                    code: ErrorCode::InvalidBehavior,
                    message: e,
                },
                Ok(b) => {
                    let result = match reorient {
                        Some(f) => self.engine.reorient(f),
                        None => Ok(()),
                    }
                    .and_then(|()| self.engine.select_behavior(b));
                    match result {
                        Ok(()) => ServerMessage::Behavior {
                            behavior: b.to_string(),
                            facing: self.engine.state().facing,
                        },
                        Err(e) => ServerMessage::Error {
                            code: engine_error_code(&e),
                            message: e.to_string(),
                        },
                    }
                }
            },
            ClientMessage::Params { name } => match self.engine.set_params(&name) {
                Ok(()) => ServerMessage::Params { name },
                Err(e) => ServerMessage::Error {
                    code: engine_error_code(&e),
                    message: e.to_string(),
                },
            },
        };
        self.reply(id, &reply);
    }
}
