//! Appliance state, command application, authentication and override locks.
//!
//! [`HomeServer::apply`] is the only mutator of appliance state. Every
//! successful call yields an [`AuditEvent`]; folding those events over the
//! initial home with [`replay`] reproduces the final appliance state.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{FactorId, HomeModel};

pub const DEFAULT_LAMP_LUX: f64 = 300.0;
pub const DEFAULT_LOCK_TICKS: u64 = 300;
pub const DEFAULT_RETAIN_WINDOW: u64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplianceKind {
    Light,
    AirConditioner,
    Tv,
    Fan,
    Curtain,
    Gate,
}

impl ApplianceKind {
    pub fn accepts(self, property: Property) -> bool {
        use ApplianceKind::*;
        use Property::*;
        matches!(
            (self, property),
            (Light | Fan, Power)
                | (AirConditioner, Power | Mode | Setpoint)
                | (Tv, Power | Channel)
                | (Curtain | Gate, Open)
        )
    }

    pub fn is_powered(self) -> bool {
        self.accepts(Property::Power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Power {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HvacMode {
    Cool,
    Heat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Power,
    Mode,
    Setpoint,
    Channel,
    Open,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Power => "power",
            Property::Mode => "mode",
            Property::Setpoint => "setpoint",
            Property::Channel => "channel",
            Property::Open => "open",
        })
    }
}

/// A property together with a value of the matching type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "property", content = "value", rename_all = "snake_case")]
pub enum Setting {
    Power(Power),
    Mode(HvacMode),
    Setpoint(f64),
    Channel(u32),
    Open(bool),
}

impl Setting {
    pub fn property(&self) -> Property {
        match self {
            Setting::Power(_) => Property::Power,
            Setting::Mode(_) => Property::Mode,
            Setting::Setpoint(_) => Property::Setpoint,
            Setting::Channel(_) => Property::Channel,
            Setting::Open(_) => Property::Open,
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            Setting::Setpoint(t) if !t.is_finite() => Err("setpoint must be finite".into()),
            Setting::Channel(0) => Err("channel must be positive".into()),
            _ => Ok(()),
        }
    }
}

/// Where a command came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Rule(String),
    /// Manual control by an operator; locks the property.
    Override,
    /// A scheduled scenario command.
    Script,
    /// Side effect of a successful authentication (gate opening).
    Auth,
}

impl Origin {
    pub const RESERVED: [&'static str; 3] = ["override", "script", "auth"];

    pub fn rule_id(&self) -> Option<&str> {
        match self {
            Origin::Rule(id) => Some(id),
            _ => None,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Rule(id) => f.write_str(id),
            Origin::Override => f.write_str("override"),
            Origin::Script => f.write_str("script"),
            Origin::Auth => f.write_str("auth"),
        }
    }
}

impl Serialize for Origin {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Origin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(match s.as_str() {
            "override" => Origin::Override,
            "script" => Origin::Script,
            "auth" => Origin::Auth,
            _ => Origin::Rule(s),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub appliance: FactorId,
    #[serde(flatten)]
    pub setting: Setting,
    pub origin: Origin,
    /// Person on whose behalf a rule issued the command, when the rule bound one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<FactorId>,
}

impl Command {
    pub fn new(appliance: impl Into<FactorId>, setting: Setting, origin: Origin) -> Self {
        Self {
            appliance: appliance.into(),
            setting,
            origin,
            subject: None,
        }
    }

    pub fn key(&self) -> (FactorId, Property) {
        (self.appliance.clone(), self.setting.property())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Appliance {
    pub kind: ApplianceKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<Power>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<HvacMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setpoint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub open: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lamp_lux: Option<f64>,
}

impl Appliance {
    pub fn new(kind: ApplianceKind, lamp_lux: Option<f64>) -> Result<Self, String> {
        let lamp_lux = match (kind, lamp_lux) {
            (ApplianceKind::Light, None) => Some(DEFAULT_LAMP_LUX),
            (ApplianceKind::Light, Some(lux)) if lux.is_finite() && lux >= 0.0 => Some(lux),
            (ApplianceKind::Light, Some(_)) => return Err("lamp_lux must be >= 0".into()),
            (_, Some(_)) => return Err("lamp_lux only applies to lights".into()),
            (_, None) => None,
        };
        Ok(Self {
            kind,
            power: kind.is_powered().then_some(Power::Off),
            mode: None,
            setpoint: None,
            channel: None,
            open: kind.accepts(Property::Open).then_some(false),
            lamp_lux,
        })
    }

    pub fn is_on(&self) -> bool {
        self.power == Some(Power::On)
    }

    pub fn get(&self, property: Property) -> Option<Setting> {
        match property {
            Property::Power => self.power.map(Setting::Power),
            Property::Mode => self.mode.map(Setting::Mode),
            Property::Setpoint => self.setpoint.map(Setting::Setpoint),
            Property::Channel => self.channel.map(Setting::Channel),
            Property::Open => self.open.map(Setting::Open),
        }
    }

    /// Writes `setting`, returning the previous value of that property.
    pub(crate) fn set(&mut self, setting: Setting) -> Option<Setting> {
        let prior = self.get(setting.property());
        match setting {
            Setting::Power(p) => self.power = Some(p),
            Setting::Mode(m) => self.mode = Some(m),
            Setting::Setpoint(t) => self.setpoint = Some(t),
            Setting::Channel(c) => self.channel = Some(c),
            Setting::Open(o) => self.open = Some(o),
        }
        prior
    }

    /// Active HVAC pull as `(mode, setpoint)`, if this is a running air conditioner.
    pub fn hvac(&self) -> Option<(HvacMode, f64)> {
        match (self.kind, self.is_on(), self.mode, self.setpoint) {
            (ApplianceKind::AirConditioner, true, Some(mode), Some(set)) => Some((mode, set)),
            _ => None,
        }
    }

    /// Lux contributed when this is a light that is switched on.
    pub fn lit_lux(&self) -> f64 {
        match (self.kind, self.is_on()) {
            (ApplianceKind::Light, true) => self.lamp_lux.unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEvent {
    pub tick: u64,
    pub command: Command,
    pub prior: Option<Setting>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverrideLock {
    pub appliance: FactorId,
    pub property: Property,
    pub expires_at: u64,
}

/// A manual correction of a recently rule-set property, to be stored as a case.
#[derive(Debug, Clone, PartialEq)]
pub struct RetainRequest {
    pub person: FactorId,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub audit: AuditEvent,
    pub retain: Option<RetainRequest>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthOutcome {
    Permit,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServerError {
    #[error("appliance `{0}` not found")]
    NotFound(String),
    #[error("appliance `{appliance}` has no property `{property}`")]
    InvalidProperty {
        appliance: FactorId,
        property: Property,
    },
    #[error("invalid value for `{0}`: {1}")]
    InvalidValue(FactorId, String),
    #[error("`{0}.{1}` is locked by a manual override")]
    Locked(FactorId, Property),
    #[error("unknown person `{0}`")]
    UnknownPerson(String),
}

#[derive(Debug, Clone, PartialEq)]
struct RuleMark {
    tick: u64,
    subject: Option<FactorId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomeServer {
    lock_ticks: u64,
    retain_window: u64,
    locks: BTreeMap<(FactorId, Property), u64>,
    rule_marks: BTreeMap<(FactorId, Property), RuleMark>,
    log: Vec<AuditEvent>,
}

impl Default for HomeServer {
    fn default() -> Self {
        Self::new(DEFAULT_LOCK_TICKS, DEFAULT_RETAIN_WINDOW)
    }
}

impl HomeServer {
    pub fn new(lock_ticks: u64, retain_window: u64) -> Self {
        Self {
            lock_ticks,
            retain_window,
            locks: BTreeMap::new(),
            rule_marks: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    /// Every audit event emitted so far, in application order.
    pub fn audit_log(&self) -> &[AuditEvent] {
        &self.log
    }

    pub fn is_locked(&self, appliance: &FactorId, property: Property, tick: u64) -> bool {
        self.locks
            .get(&(appliance.clone(), property))
            .is_some_and(|&expires| tick < expires)
    }

    pub fn live_locks(&self, tick: u64) -> Vec<OverrideLock> {
        self.locks
            .iter()
            .filter(|(_, &expires)| tick < expires)
            .map(|((appliance, property), &expires_at)| OverrideLock {
                appliance: appliance.clone(),
                property: *property,
                expires_at,
            })
            .collect()
    }

    pub fn apply(
        &mut self,
        home: &mut HomeModel,
        cmd: &Command,
        tick: u64,
    ) -> Result<Applied, ServerError> {
        let key = cmd.key();
        if matches!(cmd.origin, Origin::Rule(_)) && self.is_locked(&key.0, key.1, tick) {
            return Err(ServerError::Locked(key.0, key.1));
        }
        let prior = apply_setting(home, cmd)?;

        let mut retain = None;
        match &cmd.origin {
            Origin::Rule(_) => {
                self.rule_marks.insert(
                    key,
                    RuleMark {
                        tick,
                        subject: cmd.subject.clone(),
                    },
                );
            }
            Origin::Override => {
                if let Some(mark) = self.rule_marks.get(&key) {
                    if tick.saturating_sub(mark.tick) <= self.retain_window {
                        retain = mark.subject.clone().map(|person| RetainRequest {
                            person,
                            command: cmd.clone(),
                        });
                    }
                }
                self.locks.insert(key, tick + self.lock_ticks);
            }
            Origin::Script | Origin::Auth => {}
        }

        let audit = AuditEvent {
            tick,
            command: cmd.clone(),
            prior,
        };
        self.log.push(audit.clone());
        Ok(Applied { audit, retain })
    }

    /// Checks `credential` against the registry. A permit certifies the
    /// person and opens every gate.
    pub fn authenticate(
        &mut self,
        home: &mut HomeModel,
        person: &str,
        credential: &str,
        tick: u64,
    ) -> Result<(AuthOutcome, Vec<AuditEvent>), ServerError> {
        let expected = home
            .credential(person)
            .ok_or_else(|| ServerError::UnknownPerson(person.to_owned()))?;
        if expected != credential {
            return Ok((AuthOutcome::Denied, Vec::new()));
        }
        home.person_mut(person)
            .ok_or_else(|| ServerError::UnknownPerson(person.to_owned()))?
            .authenticated = true;

        let gates: Vec<FactorId> = home
            .appliances()
            .filter(|(_, a)| a.kind == ApplianceKind::Gate)
            .map(|(f, _)| f.id.clone())
            .collect();
        let mut events = Vec::with_capacity(gates.len());
        for gate in gates {
            let cmd = Command::new(gate, Setting::Open(true), Origin::Auth);
            events.push(self.apply(home, &cmd, tick)?.audit);
        }
        Ok((AuthOutcome::Permit, events))
    }

    /// Powers off every powered appliance that is on. Gates and curtains are untouched.
    pub fn all_off(&mut self, home: &mut HomeModel, origin: Origin, tick: u64) -> Vec<AuditEvent> {
        let on: Vec<FactorId> = home
            .appliances()
            .filter(|(_, a)| a.is_on())
            .map(|(f, _)| f.id.clone())
            .collect();
        on.into_iter()
            .filter_map(|id| {
                let cmd = Command::new(id, Setting::Power(Power::Off), origin.clone());
                self.apply(home, &cmd, tick).ok().map(|a| a.audit)
            })
            .collect()
    }
}

/// Applies a command to the appliance state without lock or retain bookkeeping.
pub fn apply_setting(home: &mut HomeModel, cmd: &Command) -> Result<Option<Setting>, ServerError> {
    let appliance = home
        .appliance_mut(cmd.appliance.as_str())
        .ok_or_else(|| ServerError::NotFound(cmd.appliance.to_string()))?;
    let property = cmd.setting.property();
    if !appliance.kind.accepts(property) {
        return Err(ServerError::InvalidProperty {
            appliance: cmd.appliance.clone(),
            property,
        });
    }
    cmd.setting
        .validate()
        .map_err(|e| ServerError::InvalidValue(cmd.appliance.clone(), e))?;
    Ok(appliance.set(cmd.setting))
}

/// Folds an audit log over an initial home.
pub fn replay<'a>(
    mut home: HomeModel,
    log: impl IntoIterator<Item = &'a AuditEvent>,
) -> Result<HomeModel, ServerError> {
    for event in log {
        apply_setting(&mut home, &event.command)?;
    }
    Ok(home)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};
    use crate::model::{FactorBodySpec, FactorSpec, HomeSpec, SpaceSpec};

    fn appliance(id: &str, kind: ApplianceKind) -> FactorSpec {
        FactorSpec {
            id: id.into(),
            position: Point::new(1.0, 1.0),
            space: None,
            body: FactorBodySpec::Appliance {
                appliance: kind,
                lamp_lux: None,
            },
        }
    }

    fn home() -> HomeModel {
        let space = |id: &str, parent: Option<&str>, outside: bool, b: [f64; 4]| SpaceSpec {
            id: id.into(),
            name: None,
            parent: parent.map(Into::into),
            outside,
            bounds: Rect::try_from(b).unwrap(),
            window_factor: 0.002,
        };
        HomeModel::build(&HomeSpec {
            spaces: vec![
                space("outside", None, true, [-10.0, -10.0, 20.0, 20.0]),
                space("home", None, false, [0.0, 0.0, 8.0, 8.0]),
                space("living_room", Some("home"), false, [0.0, 0.0, 4.0, 4.0]),
            ],
            factors: vec![
                appliance("light", ApplianceKind::Light),
                appliance("ac", ApplianceKind::AirConditioner),
                appliance("tv", ApplianceKind::Tv),
                appliance("gate", ApplianceKind::Gate),
                FactorSpec {
                    id: "lee".into(),
                    position: Point::new(-3.0, 2.0),
                    space: None,
                    body: FactorBodySpec::Person {
                        credential: Some("1234".into()),
                        preferences: Default::default(),
                    },
                },
            ],
        })
        .unwrap()
    }

    fn cmd(id: &str, setting: Setting, origin: Origin) -> Command {
        Command::new(id, setting, origin)
    }

    fn rule(id: &str) -> Origin {
        Origin::Rule(id.into())
    }

    #[test]
    fn tv_power_then_channel() {
        let mut home = home();
        let mut server = HomeServer::default();
        server
            .apply(&mut home, &cmd("tv", Setting::Power(Power::On), rule("R3")), 1)
            .unwrap();
        server
            .apply(&mut home, &cmd("tv", Setting::Channel(9), rule("R3")), 1)
            .unwrap();
        let (_, tv) = home.appliances().find(|(f, _)| f.id.as_str() == "tv").unwrap();
        assert!(tv.is_on());
        assert_eq!(tv.channel, Some(9));
    }

    #[test]
    fn cooling_commands_activate_hvac() {
        let mut home = home();
        let mut server = HomeServer::default();
        for s in [
            Setting::Mode(HvacMode::Cool),
            Setting::Setpoint(25.0),
            Setting::Power(Power::On),
        ] {
            server.apply(&mut home, &cmd("ac", s, rule("R2")), 3).unwrap();
        }
        let (_, ac) = home.appliances().find(|(f, _)| f.id.as_str() == "ac").unwrap();
        assert_eq!(ac.hvac(), Some((HvacMode::Cool, 25.0)));
    }

    #[test]
    fn schema_violations() {
        let mut home = home();
        let mut server = HomeServer::default();
        assert!(matches!(
            server.apply(&mut home, &cmd("light", Setting::Channel(7), Origin::Script), 0),
            Err(ServerError::InvalidProperty { .. })
        ));
        assert!(matches!(
            server.apply(&mut home, &cmd("fridge", Setting::Power(Power::On), Origin::Script), 0),
            Err(ServerError::NotFound(_))
        ));
        assert!(matches!(
            server.apply(&mut home, &cmd("tv", Setting::Channel(0), Origin::Script), 0),
            Err(ServerError::InvalidValue(..))
        ));
        assert!(server.audit_log().is_empty());
    }

    #[test]
    fn authentication_outcomes() {
        let mut home = home();
        let mut server = HomeServer::default();

        let (outcome, events) = server.authenticate(&mut home, "lee", "9999", 0).unwrap();
        assert_eq!(outcome, AuthOutcome::Denied);
        assert!(events.is_empty());
        assert!(!home.factor("lee").unwrap().as_person().unwrap().authenticated);

        assert_eq!(
            server.authenticate(&mut home, "ghost", "x", 0),
            Err(ServerError::UnknownPerson("ghost".into()))
        );

        let (outcome, events) = server.authenticate(&mut home, "lee", "1234", 0).unwrap();
        assert_eq!(outcome, AuthOutcome::Permit);
        assert_eq!(events.len(), 1);
        assert!(home.factor("lee").unwrap().as_person().unwrap().authenticated);
        let (_, gate) = home.appliances().find(|(f, _)| f.id.as_str() == "gate").unwrap();
        assert_eq!(gate.open, Some(true));
    }

    #[test]
    fn all_off_is_idempotent_and_skips_gate() {
        let mut home = home();
        let mut server = HomeServer::default();
        for id in ["light", "ac", "tv"] {
            server
                .apply(&mut home, &cmd(id, Setting::Power(Power::On), Origin::Script), 0)
                .unwrap();
        }
        server
            .apply(&mut home, &cmd("gate", Setting::Open(true), Origin::Script), 0)
            .unwrap();

        assert_eq!(server.all_off(&mut home, Origin::Script, 1).len(), 3);
        assert!(home.appliances().all(|(_, a)| !a.is_on()));
        let (_, gate) = home.appliances().find(|(f, _)| f.id.as_str() == "gate").unwrap();
        assert_eq!(gate.open, Some(true));
        assert!(server.all_off(&mut home, Origin::Script, 2).is_empty());
    }

    #[test]
    fn channel_survives_power_cycle() {
        let mut home = home();
        let mut server = HomeServer::default();
        server
            .apply(&mut home, &cmd("tv", Setting::Power(Power::On), Origin::Script), 0)
            .unwrap();
        server
            .apply(&mut home, &cmd("tv", Setting::Channel(9), Origin::Script), 0)
            .unwrap();
        server.all_off(&mut home, Origin::Script, 1);
        server
            .apply(&mut home, &cmd("tv", Setting::Power(Power::On), Origin::Script), 2)
            .unwrap();
        let (_, tv) = home.appliances().find(|(f, _)| f.id.as_str() == "tv").unwrap();
        assert_eq!(tv.channel, Some(9));
    }

    #[test]
    fn override_locks_rules_and_requests_retain() {
        let mut home = home();
        let mut server = HomeServer::new(300, 60);
        let mut by_rule = cmd("tv", Setting::Channel(9), rule("R3"));
        by_rule.subject = Some("lee".into());
        server.apply(&mut home, &by_rule, 61).unwrap();

        let applied = server
            .apply(&mut home, &cmd("tv", Setting::Channel(11), Origin::Override), 85)
            .unwrap();
        let retain = applied.retain.expect("override within window retains");
        assert_eq!(retain.person.as_str(), "lee");
        assert_eq!(retain.command.setting, Setting::Channel(11));

        assert!(server.is_locked(&"tv".into(), Property::Channel, 384));
        assert!(!server.is_locked(&"tv".into(), Property::Channel, 385));
        assert!(matches!(
            server.apply(&mut home, &by_rule, 100),
            Err(ServerError::Locked(..))
        ));
        // Other properties of the same appliance stay automatable.
        server
            .apply(&mut home, &cmd("tv", Setting::Power(Power::On), rule("R3")), 100)
            .unwrap();
    }

    #[test]
    fn override_outside_window_does_not_retain() {
        let mut home = home();
        let mut server = HomeServer::new(300, 60);
        let mut by_rule = cmd("tv", Setting::Channel(9), rule("R3"));
        by_rule.subject = Some("lee".into());
        server.apply(&mut home, &by_rule, 10).unwrap();
        let applied = server
            .apply(&mut home, &cmd("tv", Setting::Channel(11), Origin::Override), 71)
            .unwrap();
        assert!(applied.retain.is_none());
    }

    #[test]
    fn audit_log_replays_to_final_state() {
        let initial = home();
        let mut live = initial.clone();
        let mut server = HomeServer::default();
        let script = [
            cmd("tv", Setting::Power(Power::On), rule("R3")),
            cmd("tv", Setting::Channel(9), rule("R3")),
            cmd("ac", Setting::Mode(HvacMode::Heat), Origin::Script),
            cmd("light", Setting::Power(Power::On), rule("R1")),
            cmd("tv", Setting::Channel(4), Origin::Override),
        ];
        for (t, c) in script.iter().enumerate() {
            server.apply(&mut live, c, t as u64).unwrap();
        }
        server.all_off(&mut live, Origin::Script, 9);
        let rebuilt = replay(initial, server.audit_log()).unwrap();
        assert_eq!(rebuilt, live);
    }

    #[test]
    fn command_wire_shape() {
        let c = cmd("tv", Setting::Channel(9), rule("R3"));
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(
            json,
            r#"{"appliance":"tv","property":"channel","value":9,"origin":"R3"}"#
        );
        let back: Command = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        let bad = r#"{"appliance":"tv","property":"channel","value":"on","origin":"R3"}"#;
        assert!(serde_json::from_str::<Command>(bad).is_err());
    }
}
