//! The NDJSON wire protocol: one JSON object per line.
//!
//! Clients send commands tagged by `type` and numbered by `seq`; the server
//! answers each with exactly one `ack` or `error` carrying that `seq`, and
//! pushes `snapshot` and `trace_event` messages to subscribers.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use iss_core::engine::ClientCommand;

/// Client message types that drive the simulation itself.
pub const SIM_TYPES: [&str; 4] = ["set_weather", "move_person", "authenticate", "override"];
/// Client message types handled by the gateway.
pub const CONTROL_TYPES: [&str; 5] = ["step", "set_speed", "pause", "resume", "subscribe"];

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Control {
    /// Runs the given number of ticks right away.
    Step {
        #[serde(default = "one")]
        ticks: u64,
    },
    SetSpeed { ticks_per_second: f64 },
    Pause,
    Resume,
    /// Starts snapshot delivery, plus every trace event when `trace` is set.
    Subscribe {
        #[serde(default)]
        trace: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Sim(ClientCommand),
    Control(Control),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientMessage {
    pub seq: u64,
    pub request: Request,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("bad message: {reason}")]
    BadMessage { seq: Option<u64>, reason: String },
    #[error("unsupported message type `{kind}`")]
    Unsupported { seq: Option<u64>, kind: String },
}

impl DecodeError {
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::BadMessage { .. } => "bad_message",
            DecodeError::Unsupported { .. } => "unsupported",
        }
    }

    pub fn seq(&self) -> Option<u64> {
        match self {
            DecodeError::BadMessage { seq, .. } | DecodeError::Unsupported { seq, .. } => *seq,
        }
    }
}

fn bad(seq: Option<u64>, reason: impl Into<String>) -> DecodeError {
    DecodeError::BadMessage {
        seq,
        reason: reason.into(),
    }
}

/// Parses and validates one protocol line (without or with its newline).
pub fn decode(line: &[u8]) -> Result<ClientMessage, DecodeError> {
    let text = std::str::from_utf8(line).map_err(|_| bad(None, "line is not valid UTF-8"))?;
    let value: Value =
        serde_json::from_str(text.trim_end()).map_err(|e| bad(None, e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(bad(None, "message must be a JSON object"));
    };
    let seq = obj.get("seq").and_then(Value::as_u64);
    let kind = match obj.get("type") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(bad(seq, "`type` must be a string")),
        None => return Err(bad(seq, "missing `type`")),
    };
    let known = SIM_TYPES.contains(&kind.as_str()) || CONTROL_TYPES.contains(&kind.as_str());
    if !known {
        return Err(DecodeError::Unsupported { seq, kind });
    }
    let Some(seq) = seq else {
        return Err(bad(None, "missing or invalid `seq` (non-negative integer)"));
    };
    obj.remove("seq");

    let body = Value::Object(obj);
    let request = if SIM_TYPES.contains(&kind.as_str()) {
        Request::Sim(serde_json::from_value(body).map_err(|e| bad(Some(seq), e.to_string()))?)
    } else {
        let control: Control =
            serde_json::from_value(body).map_err(|e| bad(Some(seq), e.to_string()))?;
        match control {
            Control::Step { ticks: 0 } => return Err(bad(Some(seq), "step needs ticks >= 1")),
            Control::SetSpeed { ticks_per_second }
                if !(ticks_per_second.is_finite() && ticks_per_second > 0.0) =>
            {
                return Err(bad(Some(seq), "ticks_per_second must be positive"))
            }
            _ => {}
        }
        Request::Control(control)
    };
    Ok(ClientMessage { seq, request })
}

/// One newline-terminated line; the inverse of [`decode`].
pub fn encode_client(msg: &ClientMessage) -> String {
    let body = match &msg.request {
        Request::Sim(cmd) => serde_json::to_value(cmd),
        Request::Control(c) => serde_json::to_value(c),
    }
    .expect("client messages serialize");
    let mut obj = match body {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    obj.insert("seq".into(), msg.seq.into());
    let mut line = Value::Object(obj).to_string();
    line.push('\n');
    line
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// A full world snapshot after `tick` ticks.
    Snapshot { tick: u64, payload: Value },
    /// One trace event, as written to the trace log.
    TraceEvent { tick: u64, payload: Value },
    Ack { seq: u64, tick: u64 },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
        tick: u64,
        code: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(seq: Option<u64>, tick: u64, code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            seq,
            tick,
            code: code.to_owned(),
            message: message.into(),
        }
    }

    pub fn tick(&self) -> u64 {
        match self {
            ServerMessage::Snapshot { tick, .. }
            | ServerMessage::TraceEvent { tick, .. }
            | ServerMessage::Ack { tick, .. }
            | ServerMessage::Error { tick, .. } => *tick,
        }
    }
}

pub fn encode(msg: &ServerMessage) -> String {
    let mut line = serde_json::to_string(msg).expect("server messages serialize");
    line.push('\n');
    line
}

/// Parses a server line, for clients and tests.
pub fn decode_server(line: &str) -> Result<ServerMessage, serde_json::Error> {
    serde_json::from_str(line.trim_end())
}

#[cfg(test)]
mod tests {
    use super::*;
    use iss_core::environment::Weather;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            if let Err(e) = decode(&bytes) {
                prop_assert!(["bad_message", "unsupported"].contains(&e.code()));
            }
        }

        #[test]
        fn steps_round_trip(seq in any::<u64>(), ticks in 1u64..1_000_000) {
            let m = ClientMessage { seq, request: Request::Control(Control::Step { ticks }) };
            prop_assert_eq!(decode(encode_client(&m).as_bytes()).unwrap(), m);
        }
    }

    #[test]
    fn decodes_set_weather() {
        let m = decode(br#"{"type":"set_weather","seq":4,"weather":"hot"}"#).unwrap();
        assert_eq!(m.seq, 4);
        assert_eq!(m.request, Request::Sim(ClientCommand::set_weather(Weather::Hot)));
    }

    #[test]
    fn unknown_type_is_unsupported() {
        let e = decode(br#"{"type":"fly"}"#).unwrap_err();
        assert_eq!(e.code(), "unsupported");
        let e = decode(br#"{"type":"fly","seq":2}"#).unwrap_err();
        assert_eq!(e.seq(), Some(2));
    }

    #[test]
    fn truncated_line_is_bad() {
        let e = decode(br#"{"type":"set_we"#).unwrap_err();
        assert_eq!(e.code(), "bad_message");
        assert_eq!(decode(b"\xff\xfe").unwrap_err().code(), "bad_message");
        assert_eq!(decode(b"[1,2]").unwrap_err().code(), "bad_message");
        assert_eq!(decode(br#"{"type":"pause"}"#).unwrap_err().code(), "bad_message");
        assert_eq!(
            decode(br#"{"type":"set_weather","seq":1,"weather":"hail"}"#).unwrap_err().seq(),
            Some(1)
        );
        assert_eq!(decode(br#"{"type":"step","seq":1,"ticks":0}"#).unwrap_err().code(), "bad_message");
        assert_eq!(
            decode(br#"{"type":"set_speed","seq":1,"ticks_per_second":-1}"#).unwrap_err().code(),
            "bad_message"
        );
    }

    #[test]
    fn control_defaults() {
        let m = decode(br#"{"type":"step","seq":9}"#).unwrap();
        assert_eq!(m.request, Request::Control(Control::Step { ticks: 1 }));
        let m = decode(b"{\"type\":\"subscribe\",\"seq\":1}\n").unwrap();
        assert_eq!(m.request, Request::Control(Control::Subscribe { trace: false }));
    }

    #[test]
    fn ack_shape() {
        assert_eq!(
            encode(&ServerMessage::Ack { seq: 4, tick: 17 }),
            "{\"type\":\"ack\",\"seq\":4,\"tick\":17}\n"
        );
    }

    #[test]
    fn client_encoding_round_trips() {
        let m = ClientMessage {
            seq: 3,
            request: Request::Sim(ClientCommand::move_person("lee", 3.3, 2.2)),
        };
        assert_eq!(decode(encode_client(&m).as_bytes()).unwrap(), m);
    }
}
