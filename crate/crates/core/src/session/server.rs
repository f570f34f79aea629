//! The session service: one session per TCP connection, newline-delimited
//! JSON in both directions.
//!
//! Each connection runs three threads: the reader validates incoming
//! messages into a bounded inbox, the stepper owns the [`Runner`] and the
//! emitter serializes outgoing messages.

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::config::SessionConfig;
use super::digest::to_hex;
use super::engine::{frames_digest, Emitted, GazeEvent, Runner};
use super::protocol::{Clock, ErrorCode, FrameMessage, Message, PROTOCOL_VERSION};
use super::record::RunRecord;
use crate::error::{DroemError, Result};

/// Gaze events kept in the inbox before the oldest are dropped.
pub const INBOX_CAPACITY: usize = 256;

#[derive(Clone, Debug)]
pub struct ServeOptions {
    /// Where finished sessions write their run files.
    pub record_dir: Option<PathBuf>,
    /// Return after this many connections have finished.
    pub max_connections: Option<usize>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions { record_dir: Some(PathBuf::from("runs")), max_connections: None }
    }
}

pub struct Server {
    listener: TcpListener,
    config: SessionConfig,
    options: ServeOptions,
}

pub fn bind(config: SessionConfig, addr: &str, options: ServeOptions) -> Result<Server> {
    config.validate()?;
    let listener = TcpListener::bind(addr).map_err(|e| DroemError::Bind(format!("{addr}: {e}")))?;
    Ok(Server { listener, config, options })
}

/// Serves on `127.0.0.1:port` until the process ends.
pub fn serve(config: SessionConfig, port: u16, options: ServeOptions) -> Result<()> {
    bind(config, &format!("127.0.0.1:{port}"), options)?.run()
}

impl Server {
    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    pub fn run(self) -> Result<()> {
        let counter = Arc::new(AtomicU64::new(0));
        let mut handles = Vec::new();
        for (n, stream) in self.listener.incoming().enumerate() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let config = self.config.clone();
            let options = self.options.clone();
            let counter = counter.clone();
            handles.push(thread::spawn(move || {
                let id = counter.fetch_add(1, Ordering::SeqCst);
                if let Err(e) = handle_connection(stream, config, &options, id) {
                    log::warn!("session {id}: {e}");
                }
            }));
            if self.options.max_connections.is_some_and(|m| n + 1 >= m) {
                break;
            }
        }
        for h in handles {
            let _ = h.join();
        }
        Ok(())
    }
}

enum Control {
    Gaze(GazeEvent),
    Reconfigure(Box<SessionConfig>),
    SetClock(Clock),
    Stop,
    Fail(ErrorCode, String),
}

#[derive(Default)]
struct Inbox {
    queue: VecDeque<Control>,
    gazes: usize,
    dropped: u64,
}

struct Shared {
    inbox: Mutex<Inbox>,
    ready: Condvar,
}

impl Shared {
    fn push(&self, c: Control) {
        let mut inbox = self.inbox.lock().expect("inbox lock");
        if matches!(c, Control::Gaze(_)) {
            if inbox.gazes >= INBOX_CAPACITY {
                if let Some(pos) = inbox.queue.iter().position(|c| matches!(c, Control::Gaze(_))) {
                    inbox.queue.remove(pos);
                    inbox.gazes -= 1;
                    inbox.dropped += 1;
                }
            }
            inbox.gazes += 1;
        }
        inbox.queue.push_back(c);
        self.ready.notify_one();
    }

    /// Waits until a message arrives or `deadline` passes.
    fn drain(&self, deadline: Option<Instant>) -> (Vec<Control>, u64) {
        let mut inbox = self.inbox.lock().expect("inbox lock");
        while inbox.queue.is_empty() {
            match deadline {
                None => inbox = self.ready.wait(inbox).expect("inbox lock"),
                Some(d) => {
                    let now = Instant::now();
                    if now >= d {
                        break;
                    }
                    inbox = self.ready.wait_timeout(inbox, d - now).expect("inbox lock").0;
                }
            }
        }
        let items: Vec<Control> = inbox.queue.drain(..).collect();
        inbox.gazes = 0;
        let dropped = std::mem::take(&mut inbox.dropped);
        (items, dropped)
    }
}

fn handle_connection(stream: TcpStream, config: SessionConfig, options: &ServeOptions, id: u64) -> Result<()> {
    stream.set_nodelay(true)?;
    let (tx, rx) = mpsc::channel::<Message>();
    let writer_stream = stream.try_clone()?;
    let emitter = thread::spawn(move || {
        let mut w = BufWriter::new(writer_stream);
        for msg in rx {
            if w.write_all(msg.to_line().as_bytes()).and_then(|_| w.flush()).is_err() {
                break;
            }
        }
        let _ = w.flush();
    });
    let shared = Arc::new(Shared { inbox: Mutex::new(Inbox::default()), ready: Condvar::new() });
    let stepper = {
        let shared = shared.clone();
        let tx = tx.clone();
        let options = options.clone();
        let stream = stream.try_clone()?;
        thread::spawn(move || {
            let outcome = run_stepper(&shared, &tx, config, &options, id);
            if let Err(e) = &outcome {
                let _ = tx.send(Message::error(ErrorCode::Internal, e.to_string()));
            }
            drop(tx);
            // Unblocks the reader when the session ends from this side.
            let _ = stream.shutdown(Shutdown::Read);
        })
    };
    read_messages(&stream, &shared);
    shared.push(Control::Stop);
    let _ = stepper.join();
    drop(tx);
    let _ = emitter.join();
    let _ = stream.shutdown(Shutdown::Both);
    Ok(())
}

fn read_messages(stream: &TcpStream, shared: &Shared) {
    let reader = BufReader::new(stream);
    let mut last_t: HashMap<usize, f64> = HashMap::new();
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let msg = match Message::parse(&line) {
            Ok(m) => m,
            Err(e) => {
                shared.push(Control::Fail(ErrorCode::BadMessage, e.to_string()));
                return;
            }
        };
        match msg {
            Message::Gaze(g) => {
                if let Err(e) = g.validate() {
                    shared.push(Control::Fail(ErrorCode::GazeDomain, e.to_string()));
                    return;
                }
                if let Some(prev) = last_t.insert(g.observer, g.t) {
                    if g.t <= prev {
                        shared.push(Control::Fail(ErrorCode::GazeOrder, format!("t = {} after t = {prev}", g.t)));
                        return;
                    }
                }
                shared.push(Control::Gaze(g));
            }
            Message::Hello { version, clock } => {
                if version != PROTOCOL_VERSION {
                    shared.push(Control::Fail(ErrorCode::BadMessage, format!("protocol version {version}")));
                    return;
                }
                shared.push(Control::SetClock(clock));
            }
            Message::Config { config } => shared.push(Control::Reconfigure(config)),
            Message::Bye { .. } => return,
            Message::Frame(_) | Message::Error { .. } => {
                shared.push(Control::Fail(ErrorCode::BadMessage, "unexpected message from client".into()));
                return;
            }
        }
    }
}

fn emit(tx: &Sender<Message>, out: Emitted) {
    if let Some(frames) = out.frames {
        let digest = to_hex(frames_digest(&frames));
        let frame = frames[0].to_wire();
        let _ = tx.send(Message::Frame(FrameMessage { frame, step: out.line.step, digest }));
    }
}

fn run_stepper(
    shared: &Shared,
    tx: &Sender<Message>,
    config: SessionConfig,
    options: &ServeOptions,
    id: u64,
) -> Result<()> {
    let _ = tx.send(Message::Hello { version: PROTOCOL_VERSION, clock: Clock::Wall });
    let _ = tx.send(Message::Config { config: Box::new(config.clone()) });
    let mut runner = Runner::new(config)?;
    let mut clock = Clock::Wall;
    let mut started = false;
    let mut failure: Option<DroemError> = None;
    let mut dt = Duration::from_secs_f64(runner.engine().config().dt);
    let mut deadline = Instant::now() + dt;
    'session: loop {
        let wait = (clock == Clock::Wall).then_some(deadline);
        let (items, dropped) = shared.drain(wait);
        runner.add_dropped(dropped);
        for item in items {
            match item {
                Control::Stop => break 'session,
                Control::Fail(code, detail) => {
                    let _ = tx.send(Message::error(code, detail));
                    break 'session;
                }
                Control::SetClock(_) | Control::Reconfigure(_) if started => {
                    let _ = tx.send(Message::error(ErrorCode::ConfigRejected, "session already running"));
                    break 'session;
                }
                Control::SetClock(c) => clock = c,
                Control::Reconfigure(c) => match Runner::new(*c.clone()) {
                    Ok(r) => {
                        runner = r;
                        dt = Duration::from_secs_f64(runner.engine().config().dt);
                        deadline = Instant::now() + dt;
                        let _ = tx.send(Message::Config { config: c });
                    }
                    Err(e) => {
                        let _ = tx.send(Message::error(ErrorCode::ConfigRejected, e.to_string()));
                        break 'session;
                    }
                },
                Control::Gaze(g) => {
                    started = true;
                    let result = match clock {
                        Clock::Events => runner.push_event(g).map(|out| out.into_iter().for_each(|o| emit(tx, o))),
                        Clock::Wall => runner.hold(g),
                    };
                    if let Err(e) = result {
                        let _ = tx.send(Message::error(ErrorCode::for_error(&e), e.to_string()));
                        failure = matches!(e, DroemError::Stability { .. }).then_some(e);
                        break 'session;
                    }
                }
            }
        }
        if clock == Clock::Wall {
            let mut caught_up = 0;
            while Instant::now() >= deadline && caught_up < 4 {
                match runner.step_once() {
                    Ok(out) => emit(tx, out),
                    Err(e) => {
                        let _ = tx.send(Message::error(ErrorCode::for_error(&e), e.to_string()));
                        failure = Some(e);
                        break 'session;
                    }
                }
                started = true;
                deadline += dt;
                caught_up += 1;
            }
            if Instant::now() >= deadline {
                deadline = Instant::now() + dt;
            }
        }
    }
    let record = match failure {
        Some(e) => runner.close(Some(e)),
        None => runner.finish(None),
    };
    let path = flush_record(&record, options, id);
    let _ = tx.send(Message::Bye {
        steps: Some(record.steps.len() as u64),
        dropped: record.final_line.as_ref().map(|f| f.dropped_events),
        record: path.map(|p| p.display().to_string()),
    });
    Ok(())
}

fn flush_record(record: &RunRecord, options: &ServeOptions, id: u64) -> Option<PathBuf> {
    let dir = options.record_dir.as_ref()?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let path = dir.join(format!("session-{stamp}-{id}.ndjson"));
    let result = std::fs::create_dir_all(dir).map_err(DroemError::from).and_then(|_| record.write(&path));
    match result {
        Ok(()) => Some(path),
        Err(e) => {
            log::warn!("could not write run file {}: {e}", path.display());
            None
        }
    }
}
