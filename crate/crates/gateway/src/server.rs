//! Interactive serving.
//!
//! One listener accepts both raw NDJSON connections and WebSocket upgrades
//! (told apart by a leading `GET `). Connection threads decode lines and
//! forward them to the engine loop over a channel; the engine loop is the
//! only owner of the [`World`]. It paces ticks, applies queued commands as
//! stage-one externals in arrival order, replies to each command, writes the
//! trace log and fans messages out to subscribers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use iss_core::engine::{ClientCommand, Source, TraceEvent, TraceKind, World};
use iss_core::environment::Weather;
use tungstenite::Message;

use crate::protocol::{self, ClientMessage, Control, Request, ServerMessage};
use crate::weather::{WeatherProvider, WeatherUnavailable};

pub const DEFAULT_SPEED: f64 = 10.0;
const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Ticks per wall-clock second while running.
    pub speed: f64,
    pub start_paused: bool,
    /// Stop after the world reaches this many ticks.
    pub max_ticks: Option<u64>,
    pub trace_out: Option<PathBuf>,
    /// Polled for weather changes when live.
    pub weather: Option<WeatherProvider>,
    pub weather_poll: Duration,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            speed: DEFAULT_SPEED,
            start_paused: false,
            max_ticks: None,
            trace_out: None,
            weather: None,
            weather_poll: Duration::from_secs(600),
        }
    }
}

/// Stops a running server from another thread.
#[derive(Debug, Clone)]
pub struct ShutdownHandle(Arc<AtomicBool>);

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    fn is_set(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

type Line = Arc<str>;

enum Inbound {
    Connected { conn: u64, outbox: Sender<Line> },
    Message { conn: u64, msg: ClientMessage },
    Disconnected { conn: u64 },
    Weather(Result<Weather, WeatherUnavailable>),
}

pub struct Server {
    listener: TcpListener,
    shutdown: ShutdownHandle,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            listener,
            shutdown: ShutdownHandle(Arc::new(AtomicBool::new(false))),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        self.shutdown.clone()
    }

    /// Serves until shut down or `max_ticks` is reached, then returns the world.
    pub fn run(self, world: World, opts: ServeOptions) -> io::Result<World> {
        let trace_log = match &opts.trace_out {
            Some(path) => Some(BufWriter::new(File::create(path)?)),
            None => None,
        };
        let (tx, rx) = mpsc::channel();
        let tick = Arc::new(AtomicU64::new(world.tick_count()));

        let acceptor = {
            let (tx, tick, shutdown) = (tx.clone(), tick.clone(), self.shutdown.clone());
            let listener = self.listener;
            thread::spawn(move || accept_loop(listener, tx, tick, shutdown))
        };
        if let Some(provider) = opts.weather.clone().filter(WeatherProvider::is_live) {
            let (tx, shutdown, every) = (tx.clone(), self.shutdown.clone(), opts.weather_poll);
            thread::spawn(move || poll_weather(provider, every, tx, shutdown));
        }
        drop(tx);

        let mut engine = Engine {
            world,
            clients: BTreeMap::new(),
            pending: Vec::new(),
            paused: opts.start_paused,
            period: Duration::from_secs_f64(1.0 / opts.speed),
            tick,
            trace_log,
        };
        let result = engine.run(&rx, &self.shutdown, opts.max_ticks);
        self.shutdown.shutdown();
        let _ = acceptor.join();
        result.map(|_| engine.world)
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<Inbound>, tick: Arc<AtomicU64>, shutdown: ShutdownHandle) {
    let mut next_id = 0;
    while !shutdown.is_set() {
        match listener.accept() {
            Ok((stream, _)) => {
                next_id += 1;
                let (tx, tick, shutdown) = (tx.clone(), tick.clone(), shutdown.clone());
                let conn = next_id;
                thread::spawn(move || {
                    let _ = handle_connection(stream, conn, &tx, &tick, &shutdown);
                    let _ = tx.send(Inbound::Disconnected { conn });
                });
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(_) => thread::sleep(POLL),
        }
    }
}

fn poll_weather(provider: WeatherProvider, every: Duration, tx: Sender<Inbound>, shutdown: ShutdownHandle) {
    while !shutdown.is_set() {
        if tx.send(Inbound::Weather(provider.fetch())).is_err() {
            return;
        }
        let until = Instant::now() + every;
        while Instant::now() < until {
            if shutdown.is_set() {
                return;
            }
            thread::sleep(POLL);
        }
    }
}

/// Per-connection decoding state shared by both transports.
struct Decoder<'a> {
    conn: u64,
    last_seq: Option<u64>,
    tx: &'a Sender<Inbound>,
    outbox: &'a Sender<Line>,
    tick: &'a AtomicU64,
}

impl Decoder<'_> {
    fn line(&mut self, raw: &[u8]) {
        if raw.iter().all(u8::is_ascii_whitespace) {
            return;
        }
        let tick = self.tick.load(Ordering::SeqCst);
        let reply = match protocol::decode(raw) {
            Ok(msg) if self.last_seq.is_some_and(|last| msg.seq <= last) => ServerMessage::error(
                Some(msg.seq),
                tick,
                "bad_message",
                format!("seq {} is not greater than the previous seq", msg.seq),
            ),
            Ok(msg) => {
                self.last_seq = Some(msg.seq);
                let _ = self.tx.send(Inbound::Message {
                    conn: self.conn,
                    msg,
                });
                return;
            }
            Err(e) => ServerMessage::error(e.seq(), tick, e.code(), e.to_string()),
        };
        let _ = self.outbox.send(protocol::encode(&reply).into());
    }
}

fn handle_connection(
    stream: TcpStream,
    conn: u64,
    tx: &Sender<Inbound>,
    tick: &AtomicU64,
    shutdown: &ShutdownHandle,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(POLL * 5))?;
    let mut head = [0u8; 4];
    let n = loop {
        match stream.peek(&mut head) {
            Ok(n) if n >= 4 || n == 0 => break n,
            Ok(_) => thread::sleep(POLL),
            Err(e) if is_timeout(&e) => {}
            Err(e) => return Err(e),
        }
        if shutdown.is_set() {
            return Ok(());
        }
    };
    if n == 0 {
        return Ok(());
    }

    let (outbox, outbox_rx) = mpsc::channel::<Line>();
    let _ = tx.send(Inbound::Connected {
        conn,
        outbox: outbox.clone(),
    });
    let mut decoder = Decoder {
        conn,
        last_seq: None,
        tx,
        outbox: &outbox,
        tick,
    };
    if &head == b"GET " {
        serve_websocket(stream, &mut decoder, outbox_rx, shutdown)
    } else {
        serve_ndjson(stream, &mut decoder, outbox_rx, shutdown)
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

fn serve_ndjson(
    stream: TcpStream,
    decoder: &mut Decoder<'_>,
    outbox_rx: Receiver<Line>,
    shutdown: &ShutdownHandle,
) -> io::Result<()> {
    let mut out = stream.try_clone()?;
    let writer = thread::spawn(move || {
        for line in outbox_rx {
            if out.write_all(line.as_bytes()).is_err() {
                break;
            }
        }
        let _ = out.shutdown(std::net::Shutdown::Write);
    });

    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    let result = loop {
        if shutdown.is_set() {
            break Ok(());
        }
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => {
                decoder.line(&buf);
                break Ok(());
            }
            Ok(_) if buf.ends_with(b"\n") => {
                decoder.line(&buf);
                buf.clear();
            }
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(e) => break Err(e),
        }
    };
    // the writer ends once the engine and this connection drop their senders
    drop(writer);
    result
}

fn serve_websocket(
    stream: TcpStream,
    decoder: &mut Decoder<'_>,
    outbox_rx: Receiver<Line>,
    shutdown: &ShutdownHandle,
) -> io::Result<()> {
    stream.set_read_timeout(None)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    ws.get_mut().set_read_timeout(Some(POLL))?;
    loop {
        if shutdown.is_set() {
            let _ = ws.close(None);
            return Ok(());
        }
        loop {
            match outbox_rx.try_recv() {
                Ok(line) => {
                    if ws.send(Message::text(line.trim_end())).is_err() {
                        return Ok(());
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                for line in text.as_str().lines() {
                    decoder.line(line.as_bytes());
                }
            }
            Ok(Message::Binary(bytes)) => {
                for line in bytes.split(|b| *b == b'\n') {
                    decoder.line(line);
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                return Ok(())
            }
            Err(e) => return Err(io::Error::other(e.to_string())),
        }
    }
}

struct Client {
    outbox: Sender<Line>,
    subscribed: bool,
    trace: bool,
}

struct Pending {
    from: Option<(u64, u64)>,
    command: ClientCommand,
}

struct Engine {
    world: World,
    clients: BTreeMap<u64, Client>,
    pending: Vec<Pending>,
    paused: bool,
    period: Duration,
    tick: Arc<AtomicU64>,
    trace_log: Option<BufWriter<File>>,
}

impl Engine {
    fn run(
        &mut self,
        rx: &Receiver<Inbound>,
        shutdown: &ShutdownHandle,
        max_ticks: Option<u64>,
    ) -> io::Result<()> {
        let mut next_due = Instant::now() + self.period;
        let done = |w: &World| max_ticks.is_some_and(|m| w.tick_count() >= m);
        while !shutdown.is_set() && !done(&self.world) {
            let wait = if self.paused {
                POLL
            } else {
                next_due.saturating_duration_since(Instant::now()).min(POLL)
            };
            match rx.recv_timeout(wait) {
                Ok(msg) => {
                    self.handle(msg, &mut next_due)?;
                    while let Ok(msg) = rx.try_recv() {
                        self.handle(msg, &mut next_due)?;
                    }
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {
                    if self.paused {
                        break;
                    }
                    thread::sleep(wait);
                }
            }
            if !self.paused && Instant::now() >= next_due && !done(&self.world) {
                self.advance()?;
                next_due += self.period;
                // after a stall, resume pacing from now rather than bursting
                if next_due < Instant::now() {
                    next_due = Instant::now() + self.period;
                }
            }
        }
        if let Some(log) = &mut self.trace_log {
            log.flush()?;
        }
        Ok(())
    }

    fn send(&self, conn: u64, msg: &ServerMessage) {
        if let Some(c) = self.clients.get(&conn) {
            let _ = c.outbox.send(protocol::encode(msg).into());
        }
    }

    fn ack(&self, conn: u64, seq: u64) {
        self.send(
            conn,
            &ServerMessage::Ack {
                seq,
                tick: self.world.tick_count(),
            },
        );
    }

    fn snapshot_message(&self) -> Line {
        let snapshot = self.world.snapshot();
        protocol::encode(&ServerMessage::Snapshot {
            tick: snapshot.tick,
            payload: serde_json::to_value(&snapshot).expect("snapshots serialize"),
        })
        .into()
    }

    fn handle(&mut self, inbound: Inbound, next_due: &mut Instant) -> io::Result<()> {
        match inbound {
            Inbound::Connected { conn, outbox } => {
                self.clients.insert(
                    conn,
                    Client {
                        outbox,
                        subscribed: false,
                        trace: false,
                    },
                );
            }
            Inbound::Disconnected { conn } => {
                self.clients.remove(&conn);
                self.pending.retain(|p| p.from.is_none_or(|(c, _)| c != conn));
            }
            Inbound::Weather(Ok(w)) => {
                if w != self.world.env().weather() {
                    self.pending.push(Pending {
                        from: None,
                        command: ClientCommand::set_weather(w),
                    });
                }
            }
            Inbound::Weather(Err(e)) => self.world.note_error("weather_unavailable", e.to_string()),
            Inbound::Message { conn, msg } => match msg.request {
                Request::Sim(command) => self.pending.push(Pending {
                    from: Some((conn, msg.seq)),
                    command,
                }),
                Request::Control(control) => {
                    match control {
                        Control::Step { ticks } => {
                            for _ in 0..ticks {
                                self.advance()?;
                            }
                        }
                        Control::SetSpeed { ticks_per_second } => {
                            self.period = Duration::from_secs_f64(1.0 / ticks_per_second);
                            *next_due = Instant::now() + self.period;
                        }
                        Control::Pause => self.paused = true,
                        Control::Resume => {
                            self.paused = false;
                            *next_due = Instant::now() + self.period;
                        }
                        Control::Subscribe { trace } => {
                            if let Some(c) = self.clients.get_mut(&conn) {
                                c.subscribed = true;
                                c.trace = trace;
                            }
                        }
                    }
                    self.ack(conn, msg.seq);
                    if let Control::Subscribe { .. } = control {
                        let snap = self.snapshot_message();
                        if let Some(c) = self.clients.get(&conn) {
                            let _ = c.outbox.send(snap);
                        }
                    }
                }
            },
        }
        Ok(())
    }

    /// Runs one tick with the queued commands and publishes the results.
    fn advance(&mut self) -> io::Result<()> {
        let pending = std::mem::take(&mut self.pending);
        let externals: Vec<ClientCommand> = pending.iter().map(|p| p.command.clone()).collect();
        let events = self.world.tick(&externals);
        self.tick.store(self.world.tick_count(), Ordering::SeqCst);

        // exactly one applied-or-error event per external, in submission order
        let outcomes = events
            .iter()
            .filter(|e| matches!(e.client_command(), Some((Source::External, _))));
        for (p, event) in pending.iter().zip(outcomes) {
            let Some((conn, seq)) = p.from else { continue };
            let reply = match event.as_error() {
                Some(report) if event.kind == TraceKind::Error => {
                    ServerMessage::error(Some(seq), event.tick, &report.code, report.message)
                }
                _ => ServerMessage::Ack {
                    seq,
                    tick: event.tick,
                },
            };
            self.send(conn, &reply);
        }

        if let Some(log) = &mut self.trace_log {
            for e in &events {
                writeln!(log, "{}", e.to_line())?;
            }
            log.flush()?;
        }

        let tracing = self.clients.values().any(|c| c.subscribed && c.trace);
        let trace_lines: Vec<Line> = if tracing {
            events.iter().map(trace_message).collect()
        } else {
            Vec::new()
        };
        let snapshot = self.snapshot_message();
        for c in self.clients.values().filter(|c| c.subscribed) {
            if c.trace {
                for line in &trace_lines {
                    let _ = c.outbox.send(line.clone());
                }
            }
            let _ = c.outbox.send(snapshot.clone());
        }
        Ok(())
    }
}

fn trace_message(e: &TraceEvent) -> Line {
    protocol::encode(&ServerMessage::TraceEvent {
        tick: e.tick,
        payload: serde_json::to_value(e).expect("trace events serialize"),
    })
    .into()
}
