//! Outdoor weather and per-space indoor conditions.
//!
//! Indoor temperature and humidity follow a first-order linear update each
//! tick: leakage toward the outdoor value plus, for temperature, a pull
//! toward the setpoint of a running air conditioner in the same space.
//! Illumination carries no state and is recomputed every tick from daylight
//! through the windows plus lit lamps.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::home_server::HvacMode;
use crate::model::{HomeModel, SpaceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Rain,
    Snow,
    Hot,
    Cloudy,
}

impl Weather {
    pub const ALL: [Weather; 4] = [Weather::Rain, Weather::Snow, Weather::Hot, Weather::Cloudy];

    pub fn as_str(self) -> &'static str {
        match self {
            Weather::Rain => "rain",
            Weather::Snow => "snow",
            Weather::Hot => "hot",
            Weather::Cloudy => "cloudy",
        }
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown weather kind `{0}` (expected rain, snow, hot or cloudy)")]
pub struct UnknownKind(pub String);

impl FromStr for Weather {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Weather::ALL
            .into_iter()
            .find(|w| w.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownKind(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeOfDay {
    Morning,
    Afternoon,
    Evening,
    Night,
}

impl TimeOfDay {
    /// Wall-clock second of the day at which the bucket begins.
    pub fn start_second(self) -> u64 {
        3600 * match self {
            TimeOfDay::Morning => 6,
            TimeOfDay::Afternoon => 12,
            TimeOfDay::Evening => 18,
            TimeOfDay::Night => 22,
        }
    }

    /// Morning 06–12, afternoon 12–18, evening 18–22, night 22–06.
    pub fn at_second(second_of_day: u64) -> Self {
        match (second_of_day % 86_400) / 3600 {
            6..=11 => TimeOfDay::Morning,
            12..=17 => TimeOfDay::Afternoon,
            18..=21 => TimeOfDay::Evening,
            _ => TimeOfDay::Night,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeOfDay::Morning => "morning",
            TimeOfDay::Afternoon => "afternoon",
            TimeOfDay::Evening => "evening",
            TimeOfDay::Night => "night",
        }
    }
}

/// Temperature (°C), relative humidity (%) and illumination (lux).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conditions {
    pub temperature: f64,
    pub humidity: f64,
    pub illumination: f64,
}

impl Conditions {
    pub const fn new(temperature: f64, humidity: f64, illumination: f64) -> Self {
        Self {
            temperature,
            humidity,
            illumination,
        }
    }

    fn validate(&self, what: &str) -> Result<(), EnvError> {
        let ok = self.temperature.is_finite()
            && (0.0..=100.0).contains(&self.humidity)
            && self.illumination.is_finite()
            && self.illumination >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(EnvError::InvalidConditions(what.to_owned()))
        }
    }
}

pub type OutdoorConditions = Conditions;
pub type IndoorConditions = BTreeMap<SpaceId, Conditions>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeatherTable {
    pub rain: Conditions,
    pub snow: Conditions,
    pub hot: Conditions,
    pub cloudy: Conditions,
}

impl Default for WeatherTable {
    fn default() -> Self {
        Self {
            hot: Conditions::new(32.0, 60.0, 80_000.0),
            rain: Conditions::new(18.0, 95.0, 10_000.0),
            snow: Conditions::new(-2.0, 70.0, 20_000.0),
            cloudy: Conditions::new(22.0, 65.0, 30_000.0),
        }
    }
}

impl WeatherTable {
    pub fn row(&self, w: Weather) -> Conditions {
        match w {
            Weather::Rain => self.rain,
            Weather::Snow => self.snow,
            Weather::Hot => self.hot,
            Weather::Cloudy => self.cloudy,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        Weather::ALL
            .into_iter()
            .try_for_each(|w| self.row(w).validate(&format!("weather table row `{w}`")))
    }
}

/// Outdoor illumination multiplier per time-of-day bucket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaylightCurve {
    pub morning: f64,
    pub afternoon: f64,
    pub evening: f64,
    pub night: f64,
}

impl Default for DaylightCurve {
    fn default() -> Self {
        Self {
            morning: 0.8,
            afternoon: 1.0,
            evening: 0.2,
            night: 0.0,
        }
    }
}

impl DaylightCurve {
    pub fn multiplier(&self, tod: TimeOfDay) -> f64 {
        match tod {
            TimeOfDay::Morning => self.morning,
            TimeOfDay::Afternoon => self.afternoon,
            TimeOfDay::Evening => self.evening,
            TimeOfDay::Night => self.night,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvParams {
    /// Per-tick temperature leakage toward outdoors.
    pub alpha_t: f64,
    /// Per-tick humidity leakage toward outdoors.
    pub alpha_h: f64,
    /// Per-tick HVAC pull toward the setpoint.
    pub beta: f64,
    pub daylight: DaylightCurve,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            alpha_t: 0.02,
            alpha_h: 0.01,
            beta: 0.10,
            daylight: DaylightCurve::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("unstable parameters: need 0 < alpha_t < 1, beta >= 0 and alpha_t + beta < 1")]
    Unstable,
    #[error("alpha_h must lie in [0, 1]")]
    InvalidHumidityRate,
    #[error("daylight multipliers must lie in [0, 1]")]
    InvalidDaylight,
    #[error("invalid conditions in {0}")]
    InvalidConditions(String),
}

impl EnvParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        let Self {
            alpha_t,
            alpha_h,
            beta,
            daylight,
        } = *self;
        if !(alpha_t > 0.0 && alpha_t < 1.0 && beta >= 0.0 && alpha_t + beta < 1.0) {
            return Err(EnvError::Unstable);
        }
        if !(0.0..=1.0).contains(&alpha_h) {
            return Err(EnvError::InvalidHumidityRate);
        }
        let curve = [
            daylight.morning,
            daylight.afternoon,
            daylight.evening,
            daylight.night,
        ];
        if !curve.iter().all(|m| (0.0..=1.0).contains(m)) {
            return Err(EnvError::InvalidDaylight);
        }
        Ok(())
    }

    /// Long-run temperature with the HVAC pulling continuously:
    /// `(alpha_t·T_out + beta·T_set) / (alpha_t + beta)`.
    pub fn fixed_point(&self, outdoor: f64, setpoint: f64) -> f64 {
        (self.alpha_t * outdoor + self.beta * setpoint) / (self.alpha_t + self.beta)
    }
}

pub fn outdoor_of(
    w: Weather,
    table: &WeatherTable,
    daylight: &DaylightCurve,
    tod: TimeOfDay,
) -> OutdoorConditions {
    let row = table.row(w);
    Conditions {
        illumination: row.illumination * daylight.multiplier(tod),
        ..row
    }
}

/// One temperature update. The HVAC term only acts when its pull has the
/// sign of its mode: cooling lowers, heating raises.
pub fn step_temperature(
    current: f64,
    outdoor: f64,
    hvac: Option<(HvacMode, f64)>,
    params: &EnvParams,
) -> f64 {
    let leak = params.alpha_t * (outdoor - current);
    let pull = match hvac {
        Some((HvacMode::Cool, set)) if set < current => params.beta * (set - current),
        Some((HvacMode::Heat, set)) if set > current => params.beta * (set - current),
        _ => 0.0,
    };
    current + leak + pull
}

pub fn step_humidity(current: f64, outdoor: f64, params: &EnvParams) -> f64 {
    (current + params.alpha_h * (outdoor - current)).clamp(0.0, 100.0)
}

pub fn illumination(window_factor: f64, outdoor_lux: f64, lamp_lux: f64) -> f64 {
    window_factor * outdoor_lux + lamp_lux
}

/// Per-space appliance inputs to one environment step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApplianceLoads {
    pub hvac: BTreeMap<SpaceId, (HvacMode, f64)>,
    pub lamp_lux: BTreeMap<SpaceId, f64>,
}

impl ApplianceLoads {
    /// The lowest-id running air conditioner drives each space; lamps add up.
    pub fn from_home(home: &HomeModel) -> Self {
        let mut loads = Self::default();
        for (factor, appliance) in home.appliances() {
            if let Some(hvac) = appliance.hvac() {
                loads.hvac.entry(factor.space.clone()).or_insert(hvac);
            }
            let lux = appliance.lit_lux();
            if lux > 0.0 {
                *loads.lamp_lux.entry(factor.space.clone()).or_insert(0.0) += lux;
            }
        }
        loads
    }
}

pub fn step_indoor(
    home: &HomeModel,
    indoor: &IndoorConditions,
    outdoor: &OutdoorConditions,
    loads: &ApplianceLoads,
    params: &EnvParams,
) -> IndoorConditions {
    home.interior_spaces()
        .map(|space| {
            let prev = indoor.get(&space.id).copied().unwrap_or(*outdoor);
            let lamps = loads.lamp_lux.get(&space.id).copied().unwrap_or(0.0);
            let next = Conditions {
                temperature: step_temperature(
                    prev.temperature,
                    outdoor.temperature,
                    loads.hvac.get(&space.id).copied(),
                    params,
                ),
                humidity: step_humidity(prev.humidity, outdoor.humidity, params),
                illumination: illumination(space.window_factor, outdoor.illumination, lamps),
            };
            (space.id.clone(), next)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialIndoor {
    pub temperature: Option<f64>,
    pub humidity: Option<f64>,
}

/// Weather plus the indoor state it drives.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    weather: Weather,
    table: WeatherTable,
    params: EnvParams,
    outdoor: OutdoorConditions,
    indoor: IndoorConditions,
}

impl Environment {
    /// Starts every interior space at its initial conditions (per-space
    /// entries override `default_initial` field by field, and anything still
    /// unset falls back to the outdoor row). Illumination is evaluated for the
    /// lamps currently lit.
    pub fn new(
        home: &HomeModel,
        weather: Weather,
        table: WeatherTable,
        params: EnvParams,
        tod: TimeOfDay,
        default_initial: InitialIndoor,
        per_space: &BTreeMap<SpaceId, InitialIndoor>,
    ) -> Result<Self, EnvError> {
        params.validate()?;
        table.validate()?;
        let outdoor = outdoor_of(weather, &table, &params.daylight, tod);
        let loads = ApplianceLoads::from_home(home);
        let indoor = home
            .interior_spaces()
            .map(|space| {
                let own = per_space.get(&space.id).copied().unwrap_or_default();
                let lamps = loads.lamp_lux.get(&space.id).copied().unwrap_or(0.0);
                let c = Conditions {
                    temperature: own
                        .temperature
                        .or(default_initial.temperature)
                        .unwrap_or(outdoor.temperature),
                    humidity: own
                        .humidity
                        .or(default_initial.humidity)
                        .unwrap_or(outdoor.humidity),
                    illumination: illumination(space.window_factor, outdoor.illumination, lamps),
                };
                c.validate(&format!("initial conditions of `{}`", space.id))
                    .map(|_| (space.id.clone(), c))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            weather,
            table,
            params,
            outdoor,
            indoor,
        })
    }

    pub fn weather(&self) -> Weather {
        self.weather
    }

    /// Takes effect on the outdoor conditions at the next [`Environment::step`].
    pub fn set_weather(&mut self, w: Weather) {
        self.weather = w;
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn table(&self) -> &WeatherTable {
        &self.table
    }

    pub fn outdoor(&self) -> &OutdoorConditions {
        &self.outdoor
    }

    pub fn indoor(&self) -> &IndoorConditions {
        &self.indoor
    }

    pub fn conditions_in(&self, space: &str) -> Option<&Conditions> {
        self.indoor.get(space)
    }

    pub fn step(&mut self, home: &HomeModel, tod: TimeOfDay) {
        self.outdoor = outdoor_of(self.weather, &self.table, &self.params.daylight, tod);
        let loads = ApplianceLoads::from_home(home);
        self.indoor = step_indoor(home, &self.indoor, &self.outdoor, &loads, &self.params);
    }
}
