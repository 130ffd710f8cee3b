#![allow(dead_code)]

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use iss_core::engine::World;
use iss_gateway::protocol::{decode_server, ServerMessage};
use iss_gateway::server::{ServeOptions, Server, ShutdownHandle};
use serde_json::{json, Value};

pub const WAIT: Duration = Duration::from_secs(10);

pub struct Running {
    pub addr: SocketAddr,
    pub stop: ShutdownHandle,
    pub join: JoinHandle<World>,
}

impl Running {
    pub fn finish(self) -> World {
        self.stop.shutdown();
        self.join.join().expect("server thread")
    }
}

pub fn start(world: World, opts: ServeOptions) -> Running {
    let server = Server::bind("127.0.0.1:0").unwrap();
    let addr = server.local_addr().unwrap();
    let stop = server.shutdown_handle();
    let join = thread::spawn(move || server.run(world, opts).unwrap());
    Running { addr, stop, join }
}

pub fn paused() -> ServeOptions {
    ServeOptions {
        start_paused: true,
        ..ServeOptions::default()
    }
}

/// A blocking NDJSON client.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_seq: u64,
    /// Everything received, in order.
    pub seen: Vec<ServerMessage>,
    unread: VecDeque<ServerMessage>,
}

impl Client {
    pub fn connect(addr: SocketAddr) -> Self {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(WAIT)).unwrap();
        Self {
            writer: stream.try_clone().unwrap(),
            reader: BufReader::new(stream),
            next_seq: 1,
            seen: Vec::new(),
            unread: VecDeque::new(),
        }
    }

    pub fn raw(&mut self, bytes: &[u8]) {
        self.writer.write_all(bytes).unwrap();
    }

    /// Sends `body` with the next seq and returns that seq.
    pub fn send(&mut self, mut body: Value) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        body["seq"] = json!(seq);
        self.raw(format!("{body}\n").as_bytes());
        seq
    }

    fn read_one(&mut self) -> ServerMessage {
        let mut line = String::new();
        let n = self.reader.read_line(&mut line).expect("server reply");
        assert!(n > 0, "server closed the connection");
        let msg = decode_server(&line).expect("well-formed server line");
        self.seen.push(msg.clone());
        msg
    }

    /// The next message not yet taken by [`Client::until`] or `recv`.
    pub fn recv(&mut self) -> ServerMessage {
        match self.unread.pop_front() {
            Some(m) => m,
            None => self.read_one(),
        }
    }

    /// Takes the first unread message matching `pred`, reading more as needed.
    /// Messages skipped over stay unread.
    pub fn until(&mut self, pred: impl Fn(&ServerMessage) -> bool) -> ServerMessage {
        if let Some(i) = self.unread.iter().position(&pred) {
            return self.unread.remove(i).unwrap();
        }
        let deadline = Instant::now() + WAIT;
        loop {
            assert!(Instant::now() < deadline, "timed out waiting for a message");
            let msg = self.read_one();
            if pred(&msg) {
                return msg;
            }
            self.unread.push_back(msg);
        }
    }

    /// Sends and waits for the reply carrying the same seq.
    pub fn call(&mut self, body: Value) -> ServerMessage {
        let seq = self.send(body);
        self.until(|m| reply_seq(m) == Some(seq))
    }

    pub fn subscribe(&mut self, trace: bool) {
        let reply = self.call(json!({"type": "subscribe", "trace": trace}));
        assert!(matches!(reply, ServerMessage::Ack { .. }), "{reply:?}");
    }
}

pub fn reply_seq(m: &ServerMessage) -> Option<u64> {
    match m {
        ServerMessage::Ack { seq, .. } => Some(*seq),
        ServerMessage::Error { seq, .. } => *seq,
        _ => None,
    }
}

pub fn is_snapshot(m: &ServerMessage) -> bool {
    matches!(m, ServerMessage::Snapshot { .. })
}

pub fn snapshot_payload(m: &ServerMessage) -> &Value {
    match m {
        ServerMessage::Snapshot { payload, .. } => payload,
        other => panic!("expected a snapshot, got {other:?}"),
    }
}
