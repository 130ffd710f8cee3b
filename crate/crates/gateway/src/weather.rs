//! Weather sources: a fixed stub, or a live HTTP lookup whose condition text
//! is mapped onto the simulator's four weather kinds.

use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;
use regex::{Regex, RegexBuilder};

use iss_core::environment::Weather;

pub const DEFAULT_REGION: &str = "Kwangju";
/// `{region}` is replaced by the region code. The response body is either
/// the condition text itself or a JSON object with a `condition` field.
pub const DEFAULT_ENDPOINT: &str = "https://wttr.in/{region}?format=%C";

#[derive(Debug, Clone, PartialEq, Error)]
#[error("weather unavailable: {0}")]
pub struct WeatherUnavailable(pub String);

#[derive(Debug, Clone)]
pub enum Mode {
    Stub(Weather),
    Live { region: String, endpoint: String },
}

/// Ordered `(pattern, kind)` rows; the first case-insensitive match wins.
#[derive(Debug, Clone)]
pub struct ConditionMap(Vec<(Regex, Weather)>);

impl Default for ConditionMap {
    fn default() -> Self {
        let rows = [
            ("snow|sleet|blizzard|ice pellets", Weather::Snow),
            ("rain|shower|drizzle|thunder|storm", Weather::Rain),
            ("hot|sunny|clear|fair", Weather::Hot),
            ("cloud|overcast|fog|mist|haz", Weather::Cloudy),
        ];
        Self::new(rows.into_iter().map(|(p, w)| (p.to_owned(), w))).expect("built-in patterns")
    }
}

impl ConditionMap {
    pub fn new(rows: impl IntoIterator<Item = (String, Weather)>) -> Result<Self, regex::Error> {
        rows.into_iter()
            .map(|(p, w)| Ok((RegexBuilder::new(&p).case_insensitive(true).build()?, w)))
            .collect::<Result<_, _>>()
            .map(Self)
    }

    pub fn lookup(&self, condition: &str) -> Option<Weather> {
        let condition = condition.trim();
        self.0.iter().find(|(re, _)| re.is_match(condition)).map(|(_, w)| *w)
    }
}

#[derive(Debug, Clone)]
pub struct WeatherProvider {
    pub mode: Mode,
    pub mapping: ConditionMap,
    pub timeout: Duration,
}

impl WeatherProvider {
    pub fn stub(weather: Weather) -> Self {
        Self {
            mode: Mode::Stub(weather),
            mapping: ConditionMap::default(),
            timeout: Duration::from_secs(5),
        }
    }

    pub fn live(region: &str, endpoint: &str) -> Self {
        Self {
            mode: Mode::Live {
                region: region.to_owned(),
                endpoint: endpoint.to_owned(),
            },
            mapping: ConditionMap::default(),
            timeout: Duration::from_secs(5),
        }
    }

    pub fn is_live(&self) -> bool {
        matches!(self.mode, Mode::Live { .. })
    }

    pub fn fetch(&self) -> Result<Weather, WeatherUnavailable> {
        match &self.mode {
            Mode::Stub(w) => Ok(*w),
            Mode::Live { region, endpoint } => {
                let url = endpoint.replace("{region}", region);
                let body = self.get(&url)?;
                let condition = condition_text(&body);
                self.mapping.lookup(&condition).ok_or_else(|| {
                    WeatherUnavailable(format!("no weather kind for condition `{condition}`"))
                })
            }
        }
    }

    fn get(&self, url: &str) -> Result<String, WeatherUnavailable> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        agent
            .get(url)
            .call()
            .map_err(|e| WeatherUnavailable(e.to_string()))?
            .body_mut()
            .read_to_string()
            .map_err(|e| WeatherUnavailable(e.to_string()))
    }
}

fn condition_text(body: &str) -> String {
    match serde_json::from_str::<serde_json::Value>(body) {
        Ok(v) => match v.get("condition").and_then(|c| c.as_str()) {
            Some(c) => c.to_owned(),
            None => body.trim().to_owned(),
        },
        Err(_) => body.trim().to_owned(),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("expected stub:<kind> or live:<region>, got `{0}`")]
pub struct BadWeatherFlag(String);

impl FromStr for WeatherProvider {
    type Err = BadWeatherFlag;

    /// Parses the CLI form `stub:<kind>` or `live:<region>`. The live
    /// endpoint can be changed through `ISS_WEATHER_URL`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("stub", kind)) => kind
                .parse()
                .map(WeatherProvider::stub)
                .map_err(|_| BadWeatherFlag(s.to_owned())),
            Some(("live", region)) => {
                let region = if region.is_empty() { DEFAULT_REGION } else { region };
                let endpoint = std::env::var("ISS_WEATHER_URL")
                    .unwrap_or_else(|_| DEFAULT_ENDPOINT.to_owned());
                Ok(WeatherProvider::live(region, &endpoint))
            }
            _ => Err(BadWeatherFlag(s.to_owned())),
        }
    }
}
