//! Trace events: the observable output of each tick.
//!
//! Payloads are stored as JSON values with every float rounded to two
//! decimals, so an event compares equal to its own serialized form.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::environment::Conditions;
use crate::geometry::Point;
use crate::home_server::{AuditEvent, Command, Setting};
use crate::model::{SpaceId};
use crate::reasoning::facts::ContextFact;
use crate::reasoning::rules::Firing;
use crate::sensors::SensorReading;

use super::scenario::ClientCommand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    CommandApplied,
    RuleFired,
    FactAdded,
    FactRemoved,
    SensorReading,
    EnvUpdate,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub kind: TraceKind,
    pub payload: Value,
}

/// Who submitted a stage-one command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    External,
    Schedule,
}

/// A stage-one command that took effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientApplied {
    pub source: Source,
    pub command: ClientCommand,
    /// Space the person ended up in, for moves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceId>,
}

/// An appliance property write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceChange {
    #[serde(flatten)]
    pub command: Command,
    /// Previous value of the property, if it had one.
    pub prior: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    /// The offending command: a client command when `source` is set, otherwise
    /// an appliance command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvUpdate {
    pub space: SpaceId,
    #[serde(flatten)]
    pub conditions: Conditions,
}

fn setting_value(s: &Setting) -> Value {
    match serde_json::to_value(s).expect("settings serialize") {
        Value::Object(mut m) => m.remove("value").unwrap_or(Value::Null),
        other => other,
    }
}

/// Rounds every float in `v` to two decimals.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let f = round2(n.as_f64().unwrap_or(0.0));
            Number::from_f64(f).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(m) => Value::Object(
            m.into_iter()
                .map(|(k, v)| (k, round_value(v)))
                .collect::<Map<_, _>>(),
        ),
        other => other,
    }
}

pub fn round2(x: f64) -> f64 {
    let r = (x * 100.0).round() / 100.0;
    // avoid "-0.0" in output
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn round_point(p: Point) -> Point {
    Point::new(round2(p.x), round2(p.y))
}

pub fn round_conditions(c: Conditions) -> Conditions {
    Conditions::new(round2(c.temperature), round2(c.humidity), round2(c.illumination))
}

impl TraceEvent {
    pub fn new(tick: u64, kind: TraceKind, payload: impl Serialize) -> Self {
        let payload = serde_json::to_value(payload).expect("trace payloads serialize");
        Self {
            tick,
            kind,
            payload: round_value(payload),
        }
    }

    pub fn client_applied(tick: u64, applied: ClientApplied) -> Self {
        Self::new(tick, TraceKind::CommandApplied, applied)
    }

    pub fn appliance_change(audit: &AuditEvent) -> Self {
        Self::new(
            audit.tick,
            TraceKind::CommandApplied,
            ApplianceChange {
                command: audit.command.clone(),
                prior: audit.prior.as_ref().map(setting_value),
            },
        )
    }

    pub fn rule_fired(tick: u64, firing: &Firing) -> Self {
        Self::new(tick, TraceKind::RuleFired, firing)
    }

    pub fn fact(tick: u64, added: bool, fact: &ContextFact) -> Self {
        let kind = if added {
            TraceKind::FactAdded
        } else {
            TraceKind::FactRemoved
        };
        Self::new(tick, kind, fact)
    }

    pub fn reading(reading: &SensorReading) -> Self {
        Self::new(reading.tick, TraceKind::SensorReading, reading)
    }

    pub fn env_update(tick: u64, space: &SpaceId, conditions: Conditions) -> Self {
        Self::new(
            tick,
            TraceKind::EnvUpdate,
            EnvUpdate {
                space: space.clone(),
                conditions,
            },
        )
    }

    pub fn error(tick: u64, report: ErrorReport) -> Self {
        Self::new(tick, TraceKind::Error, report)
    }

    fn parse<T: for<'de> Deserialize<'de>>(&self, kind: TraceKind) -> Option<T> {
        if self.kind != kind {
            return None;
        }
        serde_json::from_value(self.payload.clone()).ok()
    }

    pub fn as_client_applied(&self) -> Option<ClientApplied> {
        self.payload.get("source")?;
        self.parse(TraceKind::CommandApplied)
    }

    pub fn as_appliance_change(&self) -> Option<ApplianceChange> {
        self.payload.get("appliance")?;
        self.parse(TraceKind::CommandApplied)
    }

    pub fn as_fact(&self) -> Option<ContextFact> {
        match self.kind {
            TraceKind::FactAdded => self.parse(TraceKind::FactAdded),
            TraceKind::FactRemoved => self.parse(TraceKind::FactRemoved),
            _ => None,
        }
    }

    pub fn as_env_update(&self) -> Option<EnvUpdate> {
        self.parse(TraceKind::EnvUpdate)
    }

    pub fn as_error(&self) -> Option<ErrorReport> {
        self.parse(TraceKind::Error)
    }

    /// Rule id, for `rule_fired` events.
    pub fn rule(&self) -> Option<&str> {
        match self.kind {
            TraceKind::RuleFired => self.payload.get("rule")?.as_str(),
            _ => None,
        }
    }

    /// The client command behind this event, if it came from outside the
    /// tick loop (applied or rejected).
    pub fn client_command(&self) -> Option<(Source, ClientCommand)> {
        match self.kind {
            TraceKind::CommandApplied => self.as_client_applied().map(|a| (a.source, a.command)),
            TraceKind::Error => {
                let report = self.as_error()?;
                let cmd = serde_json::from_value(report.command?).ok()?;
                Some((report.source?, cmd))
            }
            _ => None,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace events serialize")
    }
}

/// Serializes a trace as NDJSON.
pub fn to_ndjson(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}
