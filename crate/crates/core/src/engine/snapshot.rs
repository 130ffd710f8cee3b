//! Full-state views of a world, and their reconstruction from a trace.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::environment::{Conditions, Weather};
use crate::geometry::{Point, Rect};
use crate::home_server::Appliance;
use crate::model::{FactorId, FactorKind, SpaceId, SpaceKind};
use crate::reasoning::facts::ContextFact;

use super::scenario::ClientCommand;
use super::trace::{TraceEvent, TraceKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceView {
    pub id: SpaceId,
    pub name: String,
    pub kind: SpaceKind,
    pub parent: Option<SpaceId>,
    pub bounds: Rect,
    pub conditions: Conditions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorView {
    pub id: FactorId,
    pub kind: FactorKind,
    pub space: SpaceId,
    pub position: Point,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub authenticated: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub appliance: Option<Appliance>,
}

/// Everything observable about a world between ticks. Numbers carry the same
/// two-decimal rounding as the trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    /// Number of ticks completed.
    pub tick: u64,
    pub weather: Weather,
    /// Spaces in id order; the outside space reports outdoor conditions.
    pub spaces: Vec<SpaceView>,
    /// Factors in id order.
    pub factors: Vec<FactorView>,
    pub facts: BTreeSet<ContextFact>,
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshots serialize")
    }

    pub fn factor(&self, id: &str) -> Option<&FactorView> {
        self.factors.iter().find(|f| f.id.as_str() == id)
    }

    pub fn appliance(&self, id: &str) -> Option<&Appliance> {
        self.factor(id)?.appliance.as_ref()
    }

    pub fn space(&self, id: &str) -> Option<&SpaceView> {
        self.spaces.iter().find(|s| s.id.as_str() == id)
    }

    fn space_kind(&self, id: &SpaceId) -> Option<SpaceKind> {
        self.spaces.iter().find(|s| &s.id == id).map(|s| s.kind)
    }

    /// Applies one trace event's effect on observable state. Events that
    /// carry no state change (readings, firings, errors) are ignored.
    pub fn apply(&mut self, event: &TraceEvent) {
        match event.kind {
            TraceKind::CommandApplied => {
                if let Some(change) = event.as_appliance_change() {
                    let id = change.command.appliance.as_str();
                    if let Some(a) = self
                        .factors
                        .iter_mut()
                        .find(|f| f.id.as_str() == id)
                        .and_then(|f| f.appliance.as_mut())
                    {
                        a.set(change.command.setting);
                    }
                } else if let Some(applied) = event.as_client_applied() {
                    self.apply_client(&applied.command, applied.space);
                }
            }
            TraceKind::FactAdded | TraceKind::FactRemoved => {
                if let Some(fact) = event.as_fact() {
                    if event.kind == TraceKind::FactAdded {
                        self.facts.insert(fact);
                    } else {
                        self.facts.remove(&fact);
                    }
                }
            }
            TraceKind::EnvUpdate => {
                if let Some(update) = event.as_env_update() {
                    if let Some(s) = self.spaces.iter_mut().find(|s| s.id == update.space) {
                        s.conditions = update.conditions;
                    }
                }
            }
            TraceKind::SensorReading | TraceKind::RuleFired | TraceKind::Error => {}
        }
    }

    fn apply_client(&mut self, cmd: &ClientCommand, space: Option<SpaceId>) {
        match cmd {
            ClientCommand::SetWeather { weather } => self.weather = *weather,
            ClientCommand::MovePerson { person, position } => {
                let Some(dest) = space else { return };
                let dest_outside = self.space_kind(&dest) == Some(SpaceKind::Outside);
                let Some(i) = self.factors.iter().position(|f| &f.id == person) else {
                    return;
                };
                let from_outside =
                    self.space_kind(&self.factors[i].space) == Some(SpaceKind::Outside);
                let f = &mut self.factors[i];
                f.position = *position;
                f.space = dest;
                if dest_outside && !from_outside {
                    f.authenticated = Some(false);
                }
            }
            ClientCommand::Authenticate { person, .. } => {
                if let Some(f) = self.factors.iter_mut().find(|f| &f.id == person) {
                    f.authenticated = Some(true);
                }
            }
            // The appliance write follows as its own event.
            ClientCommand::Override(_) => {}
        }
    }
}

/// Folds a trace over `initial`, returning the snapshot after each of the
/// ticks `initial.tick .. initial.tick + ticks`.
pub fn replay_snapshots(initial: &Snapshot, trace: &[TraceEvent], ticks: u64) -> Vec<Snapshot> {
    let mut current = initial.clone();
    let mut out = Vec::with_capacity(ticks as usize);
    let mut events = trace.iter().peekable();
    for t in initial.tick..initial.tick + ticks {
        while let Some(e) = events.next_if(|e| e.tick == t) {
            current.apply(e);
        }
        current.tick = t + 1;
        out.push(current.clone());
    }
    out
}
