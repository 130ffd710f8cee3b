mod common;

use std::io::{Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use common::*;
use iss_core::engine::{load_scenario, LEE_AUTUMN};
use iss_gateway::protocol::ServerMessage;
use iss_gateway::server::ServeOptions;
use iss_gateway::weather::WeatherProvider;
use iss_gateway::{read_trace, run_headless};
use serde_json::json;
use tungstenite::Message;

fn lee() -> iss_core::engine::World {
    load_scenario(LEE_AUTUMN).unwrap()
}

#[test]
fn both_clients_see_weather_change() {
    let srv = start(lee(), paused());
    let mut a = Client::connect(srv.addr);
    let mut b = Client::connect(srv.addr);
    a.subscribe(false);
    b.subscribe(false);

    let seq = a.send(json!({"type": "set_weather", "weather": "hot"}));
    a.call(json!({"type": "step"}));
    assert!(a.seen.iter().any(|m| matches!(m, ServerMessage::Ack { seq: s, tick: 0 } if *s == seq)));

    for c in [&mut a, &mut b] {
        let snap = c.until(|m| is_snapshot(m) && m.tick() == 1);
        assert_eq!(snapshot_payload(&snap)["weather"], "hot");
    }
    srv.finish();
}

#[test]
fn paused_steps_are_counted() {
    let srv = start(lee(), paused());
    let mut c = Client::connect(srv.addr);
    c.subscribe(false);
    for _ in 0..3 {
        c.call(json!({"type": "step", "ticks": 1}));
    }
    // a marker round trip flushes anything still in flight
    c.call(json!({"type": "pause"}));
    thread::sleep(Duration::from_millis(100));
    c.call(json!({"type": "pause"}));
    let ticks: Vec<u64> = c.seen.iter().filter(|m| is_snapshot(m)).map(|m| m.tick()).collect();
    // one on subscribe, then one per step
    assert_eq!(ticks, vec![0, 1, 2, 3]);
    assert_eq!(srv.finish().tick_count(), 3);
}

#[test]
fn every_message_gets_one_reply() {
    let srv = start(lee(), paused());
    let mut c = Client::connect(srv.addr);
    let mut sent = vec![
        c.send(json!({"type": "move_person", "person": "lee", "position": [1.0, 1.0]})),
        c.send(json!({"type": "override", "appliance": "tv", "property": "power", "value": "on"})),
        c.send(json!({"type": "override", "appliance": "oven", "property": "power", "value": "on"})),
        c.send(json!({"type": "teleport"})),
        c.send(json!({"type": "set_speed", "ticks_per_second": 0})),
        c.send(json!({"type": "authenticate", "person": "lee", "credential": "0000"})),
    ];
    sent.push(c.send(json!({"type": "step", "ticks": 2})));
    let mut replies = Vec::new();
    while replies.len() < sent.len() {
        if let Some(seq) = reply_seq(&c.recv()) {
            replies.push(seq);
        }
    }
    replies.sort_unstable();
    assert_eq!(replies, sent);

    let code = |seq: u64| {
        c.seen.iter().find_map(|m| match m {
            ServerMessage::Error { seq: Some(s), code, .. } if *s == seq => Some(code.clone()),
            _ => None,
        })
    };
    assert_eq!(code(sent[0]), Some("unauthorized".into()));
    assert_eq!(code(sent[1]), None);
    assert_eq!(code(sent[2]), Some("not_found".into()));
    assert_eq!(code(sent[3]), Some("unsupported".into()));
    assert_eq!(code(sent[4]), Some("bad_message".into()));
    assert_eq!(code(sent[5]), Some("auth_denied".into()));
    srv.finish();
}

#[test]
fn stale_seq_is_rejected() {
    let srv = start(lee(), paused());
    let mut c = Client::connect(srv.addr);
    c.raw(b"{\"type\":\"pause\",\"seq\":5}\n{\"type\":\"pause\",\"seq\":5}\n");
    let first = c.recv();
    let second = c.recv();
    let mut kinds = [first, second].map(|m| match m {
        ServerMessage::Ack { .. } => "ack".to_owned(),
        ServerMessage::Error { code, .. } => code,
        other => panic!("{other:?}"),
    });
    kinds.sort();
    assert_eq!(kinds, ["ack".to_owned(), "bad_message".to_owned()]);
    srv.finish();
}

#[test]
fn garbage_does_not_touch_the_world() {
    let srv = start(lee(), paused());
    let mut c = Client::connect(srv.addr);
    c.subscribe(false);
    let before = c.seen.iter().find(|m| is_snapshot(m)).cloned();
    let before = before.unwrap_or_else(|| c.until(is_snapshot));
    c.raw(b"\xff\xfe\n{\"type\":\n[]\n42\n{\"seq\":1}\n");
    for _ in 0..5 {
        assert!(matches!(c.recv(), ServerMessage::Error { .. }));
    }
    let world = srv.finish();
    assert_eq!(world.tick_count(), 0);
    assert_eq!(&serde_json::to_value(world.snapshot()).unwrap(), snapshot_payload(&before));
}

#[test]
fn disconnect_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trace.ndjson");
    let srv = start(
        lee(),
        ServeOptions {
            speed: 200.0,
            max_ticks: Some(40),
            trace_out: Some(log.clone()),
            ..ServeOptions::default()
        },
    );
    let mut a = Client::connect(srv.addr);
    a.subscribe(true);
    {
        let mut b = Client::connect(srv.addr);
        b.subscribe(false);
        b.until(|m| is_snapshot(m) && m.tick() >= 2);
    }
    a.until(|m| is_snapshot(m) && m.tick() >= 40);
    let world = srv.join.join().unwrap();
    assert_eq!(world.tick_count(), 40);

    // nothing was submitted, so the log is exactly the headless trace
    let mut headless = Vec::new();
    run_headless(lee(), 40, &mut headless).unwrap();
    assert_eq!(std::fs::read(&log).unwrap(), headless);

    // subscribers with trace on get each event as it is logged
    let streamed: Vec<_> = a
        .seen
        .iter()
        .filter_map(|m| match m {
            ServerMessage::TraceEvent { payload, .. } => Some(payload.clone()),
            _ => None,
        })
        .collect();
    let logged = read_trace(std::str::from_utf8(&headless).unwrap()).unwrap();
    let logged: Vec<_> = logged.iter().map(|e| serde_json::to_value(e).unwrap()).collect();
    assert!(!streamed.is_empty());
    assert!(logged.ends_with(&streamed), "streamed events are a suffix of the log");
}

#[test]
fn websocket_clients_share_the_protocol() {
    let srv = start(lee(), paused());
    let (mut ws, _) = tungstenite::connect(format!("ws://{}/", srv.addr)).unwrap();
    let mut plain = Client::connect(srv.addr);
    plain.subscribe(false);

    ws.send(Message::text(r#"{"type":"subscribe","seq":1}"#)).unwrap();
    ws.send(Message::text(r#"{"type":"set_weather","seq":2,"weather":"snow"}"#)).unwrap();
    ws.send(Message::text(r#"{"type":"step","seq":3}"#)).unwrap();

    let mut acks = Vec::new();
    let weather = loop {
        let Message::Text(text) = ws.read().unwrap() else { continue };
        let msg = iss_gateway::protocol::decode_server(text.as_str()).unwrap();
        match msg {
            ServerMessage::Ack { seq, .. } => acks.push(seq),
            ServerMessage::Snapshot { tick: 1, payload } => break payload["weather"].clone(),
            _ => {}
        }
    };
    assert_eq!(weather, "snow");
    assert_eq!(acks, vec![1, 2]);
    let snap = plain.until(|m| is_snapshot(m) && m.tick() == 1);
    assert_eq!(snapshot_payload(&snap)["weather"], "snow");
    srv.finish();
}

fn weather_server(body: &'static str) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let mut s = stream.unwrap();
            let mut buf = [0u8; 2048];
            let _ = s.read(&mut buf);
            let resp = format!(
                "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = s.write_all(resp.as_bytes());
        }
    });
    format!("http://{addr}/{{region}}")
}

#[test]
fn live_weather_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trace.ndjson");
    let srv = start(
        lee(),
        ServeOptions {
            speed: 50.0,
            trace_out: Some(log.clone()),
            weather: Some(WeatherProvider::live("Kwangju", &weather_server("Light snow"))),
            ..ServeOptions::default()
        },
    );
    let mut c = Client::connect(srv.addr);
    c.subscribe(false);
    c.until(|m| is_snapshot(m) && snapshot_payload(m)["weather"] == "snow");
    srv.finish();
    let trace = read_trace(&std::fs::read_to_string(&log).unwrap()).unwrap();
    assert!(trace.iter().any(|e| e.client_command().is_some_and(|(_, cmd)| {
        cmd == iss_core::engine::ClientCommand::set_weather(iss_core::environment::Weather::Snow)
    })));
}

#[test]
fn unreachable_weather_keeps_last_known() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trace.ndjson");
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let srv = start(
        lee(),
        ServeOptions {
            speed: 100.0,
            max_ticks: Some(30),
            trace_out: Some(log.clone()),
            weather: Some(WeatherProvider::live("x", &format!("http://127.0.0.1:{port}/{{region}}"))),
            ..ServeOptions::default()
        },
    );
    let world = srv.join.join().unwrap();
    assert_eq!(world.env().weather(), iss_core::environment::Weather::Cloudy);
    let trace = read_trace(&std::fs::read_to_string(&log).unwrap()).unwrap();
    let codes: Vec<_> = trace.iter().filter_map(|e| e.as_error()).map(|r| r.code).collect();
    assert!(codes.contains(&"weather_unavailable".to_owned()), "{codes:?}");
}
