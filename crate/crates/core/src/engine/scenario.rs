//! Scenario documents: a home, its sensors, rules, seed cases, a command
//! schedule and configuration, in one JSON file.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{EnvError, EnvParams, InitialIndoor, TimeOfDay, Weather, WeatherTable};
use crate::geometry::Point;
use crate::home_server::{Setting, DEFAULT_LOCK_TICKS, DEFAULT_RETAIN_WINDOW};
use crate::model::{FactorId, FactorSpec, SpaceId, SpaceSpec, SpecError};
use crate::reasoning::abstraction::Thresholds;
use crate::reasoning::cbr::{Case, DEFAULT_THETA};
use crate::reasoning::rules::{Rule, RuleError};
use crate::sensors::{SensorError, SensorSpec};

/// Manual appliance control: one property of one appliance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideCommand {
    pub appliance: FactorId,
    #[serde(flatten)]
    pub setting: Setting,
}

/// A command that changes the world from outside the tick loop, whether
/// typed by an operator or scheduled in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientCommand {
    SetWeather { weather: Weather },
    MovePerson { person: FactorId, position: Point },
    Authenticate { person: FactorId, credential: String },
    Override(OverrideCommand),
}

impl ClientCommand {
    pub fn set_weather(weather: Weather) -> Self {
        ClientCommand::SetWeather { weather }
    }

    pub fn move_person(person: &str, x: f64, y: f64) -> Self {
        ClientCommand::MovePerson {
            person: person.into(),
            position: Point::new(x, y),
        }
    }

    pub fn authenticate(person: &str, credential: &str) -> Self {
        ClientCommand::Authenticate {
            person: person.into(),
            credential: credential.to_owned(),
        }
    }

    pub fn override_setting(appliance: &str, setting: Setting) -> Self {
        ClientCommand::Override(OverrideCommand {
            appliance: appliance.into(),
            setting,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCommand {
    pub at_tick: u64,
    #[serde(flatten)]
    pub command: ClientCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Seeds sensor noise, the only random element.
    pub seed: u64,
    pub start_time_of_day: TimeOfDay,
    /// Simulated seconds per tick.
    pub tick_seconds: u64,
    pub weather: Weather,
    pub weather_table: WeatherTable,
    pub env: EnvParams,
    pub thresholds: Thresholds,
    /// Starting indoor conditions for every interior space.
    pub initial_indoor: InitialIndoor,
    /// Per-space overrides of `initial_indoor`.
    pub initial_spaces: BTreeMap<SpaceId, InitialIndoor>,
    pub theta: f64,
    /// Per-feature similarity weights; uniform when absent.
    pub cbr_weights: Option<BTreeMap<String, f64>>,
    pub lock_ticks: u64,
    pub retain_window: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            start_time_of_day: TimeOfDay::Morning,
            tick_seconds: 60,
            weather: Weather::Cloudy,
            weather_table: WeatherTable::default(),
            env: EnvParams::default(),
            thresholds: Thresholds::default(),
            initial_indoor: InitialIndoor::default(),
            initial_spaces: BTreeMap::new(),
            theta: DEFAULT_THETA,
            cbr_weights: None,
            lock_ticks: DEFAULT_LOCK_TICKS,
            retain_window: DEFAULT_RETAIN_WINDOW,
        }
    }
}

impl SimConfig {
    /// Time-of-day bucket in effect during `tick`.
    pub fn time_of_day(&self, tick: u64) -> TimeOfDay {
        let second = self
            .start_time_of_day
            .start_second()
            .wrapping_add(tick.wrapping_mul(self.tick_seconds));
        TimeOfDay::at_second(second)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.tick_seconds == 0 {
            return Err(ScenarioError::Config("tick_seconds must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(ScenarioError::Config("theta must lie in [0, 1]".into()));
        }
        self.thresholds.validate().map_err(ScenarioError::Config)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub spaces: Vec<SpaceSpec>,
    #[serde(default)]
    pub factors: Vec<FactorSpec>,
    #[serde(default)]
    pub sensors: Vec<SensorSpec>,
    #[serde(default)]
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub cases: Vec<Case>,
    #[serde(default)]
    pub schedule: Vec<ScheduledCommand>,
    #[serde(default)]
    pub config: SimConfig,
}

/// Where in a document a parse failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    /// Dotted path of the offending field, e.g. `rules[0].when[1]`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)?;
        if !matches!(self.path.as_str(), "" | "." | "?") {
            write!(f, ", at `{}`", self.path)?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(ParseError),
    #[error("invalid home: {0}")]
    Spec(#[from] SpecError),
    #[error("invalid sensors: {0}")]
    Sensor(#[from] SensorError),
    #[error("invalid rules: {0}")]
    Rule(#[from] RuleError),
    #[error("invalid environment: {0}")]
    Env(#[from] EnvError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid case: {0}")]
    Case(String),
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::Parse(ParseError {
                line: inner.line(),
                column: inner.column(),
                path,
                message: strip_position(&inner.to_string()),
            })
        })?;
        scenario.config.validate()?;
        Ok(scenario)
    }

    /// Schedule in `(at_tick, declaration order)` order.
    pub fn sorted_schedule(&self) -> Vec<ScheduledCommand> {
        let mut schedule = self.schedule.clone();
        schedule.sort_by_key(|s| s.at_tick);
        schedule
    }
}

// serde_json appends " at line L column C"; the position is reported separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_owned(),
        None => msg.to_owned(),
    }
}
