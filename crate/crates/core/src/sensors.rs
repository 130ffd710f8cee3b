//! Virtual sensors sampling the simulated world.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{Conditions, Environment};
use crate::geometry::Point;
use crate::model::{FactorId, HomeModel, SpaceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Temperature,
    Humidity,
    Light,
    Location,
    Presence,
}

impl SensorKind {
    pub fn is_scalar(self) -> bool {
        matches!(
            self,
            SensorKind::Temperature | SensorKind::Humidity | SensorKind::Light
        )
    }

    fn read(self, c: &Conditions) -> f64 {
        match self {
            SensorKind::Temperature => c.temperature,
            SensorKind::Humidity => c.humidity,
            SensorKind::Light => c.illumination,
            SensorKind::Location | SensorKind::Presence => unreachable!("not a scalar sensor"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub id: String,
    pub kind: SensorKind,
    pub space: SpaceId,
    #[serde(default = "default_period")]
    pub period: u64,
    #[serde(default)]
    pub noise_sigma: f64,
}

fn default_period() -> u64 {
    1
}

impl SensorSpec {
    pub fn is_due(&self, tick: u64) -> bool {
        tick.is_multiple_of(self.period)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReadingValue {
    Scalar(f64),
    Location {
        person: FactorId,
        position: Point,
    },
    Presence {
        occupied: bool,
        persons: Vec<FactorId>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub sensor: String,
    pub kind: SensorKind,
    pub space: SpaceId,
    pub tick: u64,
    pub value: ReadingValue,
}

impl SensorReading {
    pub fn scalar(&self) -> Option<f64> {
        match self.value {
            ReadingValue::Scalar(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("duplicate sensor id `{0}`")]
    DuplicateId(String),
    #[error("sensor `{0}` needs a period of at least 1 tick")]
    ZeroPeriod(String),
    #[error("sensor `{0}` needs a finite, non-negative noise sigma")]
    InvalidNoise(String),
    #[error("sensor `{sensor}` names unknown space `{space}`")]
    UnknownSpace { sensor: String, space: SpaceId },
    #[error("location sensors must share one period (found {0} and {1})")]
    MixedLocationPeriods(u64, u64),
}

/// Checks sensor declarations against the home and returns them sorted by id.
pub fn validate(
    mut sensors: Vec<SensorSpec>,
    home: &HomeModel,
) -> Result<Vec<SensorSpec>, SensorError> {
    sensors.sort_by(|a, b| a.id.cmp(&b.id));
    let mut seen = BTreeSet::new();
    let mut location_period = None;
    for s in &sensors {
        if !seen.insert(s.id.as_str()) {
            return Err(SensorError::DuplicateId(s.id.clone()));
        }
        if s.period == 0 {
            return Err(SensorError::ZeroPeriod(s.id.clone()));
        }
        if !(s.noise_sigma.is_finite() && s.noise_sigma >= 0.0) {
            return Err(SensorError::InvalidNoise(s.id.clone()));
        }
        if home.space(s.space.as_str()).is_none() {
            return Err(SensorError::UnknownSpace {
                sensor: s.id.clone(),
                space: s.space.clone(),
            });
        }
        if s.kind == SensorKind::Location {
            match location_period {
                Some(p) if p != s.period => {
                    return Err(SensorError::MixedLocationPeriods(p, s.period))
                }
                _ => location_period = Some(s.period),
            }
        }
    }
    Ok(sensors)
}

/// Samples every sensor due at `tick`.
///
/// `sensors` must be sorted by id (as returned by [`validate`]); the output
/// follows that order, with location readings ordered by person id within a
/// sensor. The RNG is only drawn from for sensors with non-zero noise.
pub fn sample<R: Rng + ?Sized>(
    sensors: &[SensorSpec],
    home: &HomeModel,
    env: &Environment,
    tick: u64,
    rng: &mut R,
) -> Vec<SensorReading> {
    let mut out = Vec::new();
    for s in sensors.iter().filter(|s| s.is_due(tick)) {
        let reading = |value| SensorReading {
            sensor: s.id.clone(),
            kind: s.kind,
            space: s.space.clone(),
            tick,
            value,
        };
        match s.kind {
            kind if kind.is_scalar() => {
                let conditions = env.conditions_in(s.space.as_str()).unwrap_or(env.outdoor());
                let mut v = kind.read(conditions);
                if s.noise_sigma > 0.0 {
                    let noise = Normal::new(0.0, s.noise_sigma).expect("validated sigma");
                    v += noise.sample(rng);
                }
                if kind != SensorKind::Temperature {
                    v = v.max(0.0);
                }
                out.push(reading(ReadingValue::Scalar(v)));
            }
            SensorKind::Location => {
                for (factor, _) in home.persons().filter(|(f, _)| f.space == s.space) {
                    out.push(reading(ReadingValue::Location {
                        person: factor.id.clone(),
                        position: factor.position,
                    }));
                }
            }
            _ => {
                let persons: Vec<FactorId> = home
                    .persons()
                    .filter(|(f, _)| f.space == s.space)
                    .map(|(f, _)| f.id.clone())
                    .collect();
                out.push(reading(ReadingValue::Presence {
                    occupied: !persons.is_empty(),
                    persons,
                }));
            }
        }
    }
    out
}
