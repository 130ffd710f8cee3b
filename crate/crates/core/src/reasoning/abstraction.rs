//! Raw readings to high-level context facts.
//!
//! Location-derived facts (`located-in`, `present`, `absent`, `entered`,
//! `sitting-on`) are recomputed on census ticks, the ticks at which the
//! location sensors are due. A person without a location reading on a census
//! tick is considered away from the home. Between census ticks those facts
//! carry over unchanged, except `entered`, which only ever lasts one tick.
//!
//! Scalar facts are recomputed per space whenever readings for that space
//! arrive and carry over otherwise. A space's temperature is the mean of the
//! temperature readings taken anywhere in its subtree, so the root's band
//! summarizes the whole home. Darkness uses light readings taken in the space
//! itself.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::model::{FactorId, HomeModel};
use crate::sensors::{ReadingValue, SensorKind, SensorReading};

use super::facts::{ContextFact, FactSet, Object, Predicate, TempBand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Meters between a person and a furniture anchor that count as seated.
    pub sit_radius: f64,
    /// Consecutive in-radius location samples before `sitting-on` holds.
    pub sit_dwell: u32,
    pub dark_lux: f64,
    pub comfort_low: f64,
    pub comfort_high: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            sit_radius: 0.6,
            sit_dwell: 2,
            dark_lux: 150.0,
            comfort_low: 20.0,
            comfort_high: 26.0,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.sit_radius.is_finite() && self.sit_radius >= 0.0) {
            return Err("sit_radius must be finite and >= 0".into());
        }
        if self.sit_dwell == 0 {
            return Err("sit_dwell must be at least 1".into());
        }
        if !self.dark_lux.is_finite() {
            return Err("dark_lux must be finite".into());
        }
        if !(self.comfort_low <= self.comfort_high) {
            return Err("comfort band needs comfort_low <= comfort_high".into());
        }
        Ok(())
    }

    /// Hot above the comfort band, cold below it; the band itself is closed.
    pub fn band(&self, temperature: f64) -> TempBand {
        if temperature > self.comfort_high {
            TempBand::Hot
        } else if temperature < self.comfort_low {
            TempBand::Cold
        } else {
            TempBand::Comfort
        }
    }
}

/// Dwell counters carried between ticks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Abstractor {
    dwell: BTreeMap<(FactorId, FactorId), u32>,
}

impl Abstractor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Derives the facts for `tick`. `census` is true when location sensors
    /// were due this tick.
    pub fn abstract_readings(
        &mut self,
        readings: &[SensorReading],
        home: &HomeModel,
        prev: &FactSet,
        thresholds: &Thresholds,
        tick: u64,
        census: bool,
    ) -> FactSet {
        let mut facts = FactSet::new(tick);
        let root = home.root().as_str();

        if census {
            // First reading wins when a person is seen by several sensors.
            let mut seen: BTreeMap<&FactorId, (&str, Point)> = BTreeMap::new();
            for r in readings {
                if let ReadingValue::Location { person, position } = &r.value {
                    seen.entry(person).or_insert((r.space.as_str(), *position));
                }
            }

            for (person, _) in home.persons() {
                let pid = person.id.as_str();
                let sighting = seen.get(&person.id);
                let inside = sighting.is_some_and(|(space, _)| home.is_interior(space));

                if let Some((space, _)) = sighting {
                    facts.insert(ContextFact::id(pid, Predicate::LocatedIn, *space));
                }
                if inside {
                    facts.insert(ContextFact::id(pid, Predicate::Present, root));
                    if prev.contains(&ContextFact::id(pid, Predicate::Absent, root)) {
                        facts.insert(ContextFact::id(pid, Predicate::Entered, root));
                    }
                } else {
                    facts.insert(ContextFact::id(pid, Predicate::Absent, root));
                }

                for anchor in home.furniture() {
                    let counter = self
                        .dwell
                        .entry((person.id.clone(), anchor.id.clone()))
                        .or_insert(0);
                    let near = sighting.is_some_and(|(_, at)| {
                        at.distance(&anchor.position) <= thresholds.sit_radius
                    });
                    *counter = if near { counter.saturating_add(1) } else { 0 };
                    if *counter >= thresholds.sit_dwell {
                        facts.insert(ContextFact::id(pid, Predicate::SittingOn, anchor.id.as_str()));
                    }
                }
            }
        } else {
            facts.facts.extend(
                prev.iter()
                    .filter(|f| f.predicate.is_locational() && f.predicate != Predicate::Entered)
                    .cloned(),
            );
        }

        let mut temps: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut lux: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in readings {
            match (r.kind, r.scalar()) {
                (SensorKind::Temperature, Some(v)) => {
                    temps.entry(r.space.as_str()).or_default().push(v)
                }
                (SensorKind::Light, Some(v)) => lux.entry(r.space.as_str()).or_default().push(v),
                _ => {}
            }
        }

        for space in home.spaces() {
            let sid = space.id.as_str();

            let subtree = home.subtree(&space.id);
            let mut sum = 0.0;
            let mut n = 0usize;
            for id in &subtree {
                if let Some(vs) = temps.get(id.as_str()) {
                    sum += vs.iter().sum::<f64>();
                    n += vs.len();
                }
            }
            if n > 0 {
                let band = thresholds.band(sum / n as f64);
                facts.insert(ContextFact::new(sid, Predicate::TempBand, Object::Band(band)));
            } else {
                carry(&mut facts, prev, sid, Predicate::TempBand);
            }

            match lux.get(sid) {
                Some(vs) => {
                    let mean = vs.iter().sum::<f64>() / vs.len() as f64;
                    facts.insert(ContextFact::new(
                        sid,
                        Predicate::Dark,
                        Object::Bool(mean < thresholds.dark_lux),
                    ));
                }
                None => carry(&mut facts, prev, sid, Predicate::Dark),
            }
        }

        facts
    }
}

fn carry(facts: &mut FactSet, prev: &FactSet, subject: &str, predicate: Predicate) {
    facts.facts.extend(
        prev.iter()
            .filter(|f| f.subject == subject && f.predicate == predicate)
            .cloned(),
    );
}
