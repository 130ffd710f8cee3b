//! The tick loop.
//!
//! Each tick runs seven stages in a fixed order:
//!
//! 1. apply external, then scheduled, client commands
//! 2. step the environment
//! 3. sample sensors
//! 4. abstract readings into facts
//! 5. evaluate rules, resolving channels through the case base
//! 6. apply the resulting commands
//! 7. advance the tick
//!
//! Commands issued in stage 6 affect the environment from the next tick on.
//! Failures anywhere become `error` trace events; a tick never aborts.

pub mod scenario;
pub mod snapshot;
pub mod trace;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::environment::{Conditions, Environment, TimeOfDay};
use crate::home_server::{
    ApplianceKind, AuthOutcome, Command, HomeServer, Origin, Property, ServerError, Setting,
};
use crate::model::{FactorId, FactorKind, HomeModel, HomeSpec, ModelError, SpaceId};
use crate::reasoning::abstraction::Abstractor;
use crate::reasoning::cbr::{Case, CaseAction, CaseBase, Signature, Weights, WATCHING_TV};
use crate::reasoning::facts::FactSet;
use crate::reasoning::rules::{evaluate, validate_rules, ActionContext, Rule};
use crate::sensors::{self, SensorKind, SensorSpec};

pub use scenario::{
    ClientCommand, OverrideCommand, ParseError, Scenario, ScenarioError, ScheduledCommand,
    SimConfig,
};
pub use snapshot::{replay_snapshots, FactorView, Snapshot, SpaceView};
pub use trace::{ClientApplied, ErrorReport, Source, TraceEvent, TraceKind};

use trace::{round_conditions, round_point};

/// The canonical case-study scenario: lee comes home on an autumn evening.
pub const LEE_AUTUMN: &str = include_str!("../../scenarios/lee_autumn.json");

/// All mutable simulation state. One owner advances it tick by tick.
#[derive(Debug, Clone)]
pub struct World {
    home: HomeModel,
    env: Environment,
    sensors: Vec<SensorSpec>,
    abstractor: Abstractor,
    facts: FactSet,
    rules: Vec<Rule>,
    casebase: CaseBase,
    server: HomeServer,
    config: SimConfig,
    schedule: BTreeMap<u64, Vec<ClientCommand>>,
    tick: u64,
    rng: ChaCha8Rng,
    /// Rounded conditions last reported per space, for `env_update` deltas.
    reported: BTreeMap<SpaceId, Conditions>,
    pending_errors: Vec<ErrorReport>,
}

pub fn load_scenario(text: &str) -> Result<World, ScenarioError> {
    World::from_scenario(Scenario::parse(text)?)
}

fn model_code(e: &ModelError) -> &'static str {
    match e {
        ModelError::NotFound(_) => "not_found",
        ModelError::CannotCloseRoot | ModelError::TargetIsClosing(_) => "invalid_space",
        ModelError::Unauthorized(_) => "unauthorized",
        ModelError::OutOfBounds(..) => "out_of_bounds",
        ModelError::DuplicateFactor(_) => "duplicate_factor",
    }
}

fn server_code(e: &ServerError) -> &'static str {
    match e {
        ServerError::NotFound(_) => "not_found",
        ServerError::InvalidProperty { .. } => "invalid_property",
        ServerError::InvalidValue(..) => "invalid_value",
        ServerError::Locked(..) => "override_locked",
        ServerError::UnknownPerson(_) => "unknown_person",
    }
}

struct RuleContext<'a> {
    home: &'a HomeModel,
    casebase: &'a CaseBase,
    theta: f64,
    signature: &'a dyn Fn(&str) -> Signature,
}

impl ActionContext for RuleContext<'_> {
    fn select(
        &self,
        kind: Option<ApplianceKind>,
        space: Option<&str>,
        property: Property,
    ) -> Vec<FactorId> {
        self.home
            .appliances()
            .filter(|(f, a)| {
                kind.is_none_or(|k| k == a.kind)
                    && space.is_none_or(|s| f.space.as_str() == s)
                    && a.kind.accepts(property)
            })
            .map(|(f, _)| f.id.clone())
            .collect()
    }

    fn is_person(&self, id: &str) -> bool {
        self.home
            .factor(id)
            .is_some_and(|f| f.kind() == FactorKind::Person)
    }

    fn resolve_channel(&self, person: &str) -> Option<u32> {
        let favorite = self
            .home
            .factor(person)
            .and_then(|f| f.as_person())
            .and_then(|p| p.favorite_channel());
        self.casebase
            .resolve_channel(&(self.signature)(person), self.theta, favorite)
    }
}

impl World {
    pub fn from_scenario(sc: Scenario) -> Result<Self, ScenarioError> {
        let schedule_list = sc.sorted_schedule();
        let Scenario {
            spaces,
            factors,
            sensors: sensor_specs,
            rules,
            cases,
            config,
            ..
        } = sc;
        let home = HomeModel::build(&HomeSpec { spaces, factors })?;
        let sensors = sensors::validate(sensor_specs, &home)?;
        validate_rules(&rules)?;

        let weights = match &config.cbr_weights {
            Some(w) => Weights::PerFeature(w.clone()),
            None => Weights::Uniform,
        };
        for case in &cases {
            if case.action.setting.property() != Property::Channel {
                return Err(ScenarioError::Case(format!(
                    "case for `{}` must set a channel",
                    case.action.appliance
                )));
            }
        }
        let casebase = CaseBase::from_cases(weights, cases);

        let env = Environment::new(
            &home,
            config.weather,
            config.weather_table,
            config.env,
            config.time_of_day(0),
            config.initial_indoor,
            &config.initial_spaces,
        )?;

        let mut schedule: BTreeMap<u64, Vec<ClientCommand>> = BTreeMap::new();
        for s in schedule_list {
            schedule.entry(s.at_tick).or_default().push(s.command);
        }

        let mut world = Self {
            server: HomeServer::new(config.lock_ticks, config.retain_window),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            home,
            env,
            sensors,
            abstractor: Abstractor::new(),
            facts: FactSet::new(0),
            rules,
            casebase,
            config,
            schedule,
            tick: 0,
            reported: BTreeMap::new(),
            pending_errors: Vec::new(),
        };
        world.reported = world.current_conditions();
        Ok(world)
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn home(&self) -> &HomeModel {
        &self.home
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn facts(&self) -> &FactSet {
        &self.facts
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn sensors(&self) -> &[SensorSpec] {
        &self.sensors
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn casebase(&self) -> &CaseBase {
        &self.casebase
    }

    /// Replaces the case base, e.g. to carry learned cases into a fresh run.
    pub fn set_casebase(&mut self, casebase: CaseBase) {
        self.casebase = casebase;
    }

    pub fn server(&self) -> &HomeServer {
        &self.server
    }

    pub fn time_of_day(&self) -> TimeOfDay {
        self.config.time_of_day(self.tick)
    }

    /// Queues an error (e.g. from a weather provider) to be traced at the start of the next tick.
    pub fn note_error(&mut self, code: &str, message: impl Into<String>) {
        self.pending_errors.push(ErrorReport {
            code: code.to_owned(),
            message: message.into(),
            source: None,
            command: None,
        });
    }

    fn current_conditions(&self) -> BTreeMap<SpaceId, Conditions> {
        let outside = self.home.outside().clone();
        self.env
            .indoor()
            .iter()
            .map(|(id, c)| (id.clone(), round_conditions(*c)))
            .chain([(outside, round_conditions(*self.env.outdoor()))])
            .collect()
    }

    pub fn snapshot(&self) -> Snapshot {
        let conditions = self.current_conditions();
        let spaces = self
            .home
            .spaces()
            .map(|s| SpaceView {
                id: s.id.clone(),
                name: s.name.clone(),
                kind: s.kind,
                parent: s.parent.clone(),
                bounds: s.bounds,
                conditions: conditions[&s.id],
            })
            .collect();
        let factors = self
            .home
            .factors()
            .map(|f| FactorView {
                id: f.id.clone(),
                kind: f.kind(),
                space: f.space.clone(),
                position: round_point(f.position),
                authenticated: f.as_person().map(|p| p.authenticated),
                appliance: f.as_appliance().cloned(),
            })
            .collect();
        Snapshot {
            tick: self.tick,
            weather: self.env.weather(),
            spaces,
            factors,
            facts: self.facts.facts.clone(),
        }
    }

    fn signature_for(&self, person: &str) -> Signature {
        Signature::context(person, WATCHING_TV, self.time_of_day(), self.env.weather())
    }

    /// Runs one tick. `external` commands run before this tick's scheduled ones.
    pub fn tick(&mut self, external: &[ClientCommand]) -> Vec<TraceEvent> {
        let t = self.tick;
        let mut events = Vec::new();

        // 1. commands
        for report in std::mem::take(&mut self.pending_errors) {
            events.push(TraceEvent::error(t, report));
        }
        for cmd in external {
            self.apply_client(cmd, Source::External, &mut events);
        }
        if let Some(scheduled) = self.schedule.get(&t).cloned() {
            for cmd in &scheduled {
                self.apply_client(cmd, Source::Schedule, &mut events);
            }
        }

        // 2. environment
        self.env.step(&self.home, self.config.time_of_day(t));
        let now = self.current_conditions();
        for (space, c) in &now {
            if self.reported.get(space) != Some(c) {
                events.push(TraceEvent::env_update(t, space, *c));
            }
        }
        self.reported = now;

        // 3. sensors
        let readings = sensors::sample(&self.sensors, &self.home, &self.env, t, &mut self.rng);
        events.extend(readings.iter().map(TraceEvent::reading));

        // 4. abstraction
        let census = self
            .sensors
            .iter()
            .filter(|s| s.kind == SensorKind::Location)
            .all(|s| s.is_due(t));
        let facts = self.abstractor.abstract_readings(
            &readings,
            &self.home,
            &self.facts,
            &self.config.thresholds,
            t,
            census,
        );
        let (added, removed) = facts.diff(&self.facts);
        events.extend(added.into_iter().map(|f| TraceEvent::fact(t, true, f)));
        events.extend(removed.into_iter().map(|f| TraceEvent::fact(t, false, f)));

        // 5. rules
        let signature = |person: &str| self.signature_for(person);
        let ctx = RuleContext {
            home: &self.home,
            casebase: &self.casebase,
            theta: self.config.theta,
            signature: &signature,
        };
        let server = &self.server;
        let locked = |a: &FactorId, p: Property| server.is_locked(a, p, t);
        let evaluation = evaluate(&self.rules, &self.facts, &facts, &locked, &ctx);
        events.extend(evaluation.firings.iter().map(|f| TraceEvent::rule_fired(t, f)));
        for cmd in &evaluation.suppressed {
            events.push(self.command_error(t, cmd, &ServerError::Locked(cmd.appliance.clone(), cmd.setting.property())));
        }

        // 6. apply
        for cmd in &evaluation.commands {
            match self.server.apply(&mut self.home, cmd, t) {
                Ok(applied) => events.push(TraceEvent::appliance_change(&applied.audit)),
                Err(e) => events.push(self.command_error(t, cmd, &e)),
            }
        }

        // 7. advance
        self.facts = facts;
        self.tick += 1;
        events
    }

    fn command_error(&self, t: u64, cmd: &Command, e: &ServerError) -> TraceEvent {
        TraceEvent::error(
            t,
            ErrorReport {
                code: server_code(e).to_owned(),
                message: e.to_string(),
                source: None,
                command: serde_json::to_value(cmd).ok(),
            },
        )
    }

    fn apply_client(&mut self, cmd: &ClientCommand, source: Source, events: &mut Vec<TraceEvent>) {
        let t = self.tick;
        let fail = |code: &str, message: String| {
            TraceEvent::error(
                t,
                ErrorReport {
                    code: code.to_owned(),
                    message,
                    source: Some(source),
                    command: serde_json::to_value(cmd).ok(),
                },
            )
        };
        let applied = |space: Option<SpaceId>| {
            TraceEvent::client_applied(
                t,
                ClientApplied {
                    source,
                    command: cmd.clone(),
                    space,
                },
            )
        };

        match cmd {
            ClientCommand::SetWeather { weather } => {
                self.env.set_weather(*weather);
                events.push(applied(None));
            }
            ClientCommand::MovePerson { person, position } => {
                match self.home.move_person(person.as_str(), *position) {
                    Ok(()) => {
                        let space = self.home.factor(person.as_str()).map(|f| f.space.clone());
                        events.push(applied(space));
                    }
                    Err(e) => events.push(fail(model_code(&e), e.to_string())),
                }
            }
            ClientCommand::Authenticate { person, credential } => {
                match self
                    .server
                    .authenticate(&mut self.home, person.as_str(), credential, t)
                {
                    Ok((AuthOutcome::Permit, audits)) => {
                        events.push(applied(None));
                        events.extend(audits.iter().map(TraceEvent::appliance_change));
                    }
                    Ok((AuthOutcome::Denied, _)) => events.push(fail(
                        "auth_denied",
                        format!("credential rejected for `{person}`"),
                    )),
                    Err(e) => events.push(fail(server_code(&e), e.to_string())),
                }
            }
            ClientCommand::Override(o) => {
                let command = Command::new(o.appliance.clone(), o.setting, Origin::Override);
                match self.server.apply(&mut self.home, &command, t) {
                    Ok(result) => {
                        events.push(applied(None));
                        events.push(TraceEvent::appliance_change(&result.audit));
                        if let Some(req) = result.retain {
                            // Only channel choices are learned.
                            if let Setting::Channel(_) = req.command.setting {
                                self.casebase.retain(Case {
                                    signature: self.signature_for(req.person.as_str()),
                                    action: CaseAction {
                                        appliance: req.command.appliance.clone(),
                                        setting: req.command.setting,
                                    },
                                    retained_at: t,
                                });
                            }
                        }
                    }
                    Err(e) => events.push(fail(server_code(&e), e.to_string())),
                }
            }
        }
    }

    /// Runs `n` ticks with scheduled commands only.
    pub fn run(&mut self, n: u64) -> Vec<TraceEvent> {
        let mut trace = Vec::new();
        for _ in 0..n {
            trace.extend(self.tick(&[]));
        }
        trace
    }

    /// Runs `n` ticks, feeding `timeline[tick]` in as external commands.
    pub fn run_with(
        &mut self,
        n: u64,
        timeline: &BTreeMap<u64, Vec<ClientCommand>>,
    ) -> Vec<TraceEvent> {
        let mut trace = Vec::new();
        for _ in 0..n {
            let external = timeline.get(&self.tick).map(Vec::as_slice).unwrap_or(&[]);
            trace.extend(self.tick(external));
        }
        trace
    }
}

/// The externally submitted commands recorded in a trace, by tick, in
/// submission order. Feeding these to [`World::run_with`] on a fresh world
/// reproduces the session.
pub fn external_timeline(trace: &[TraceEvent]) -> BTreeMap<u64, Vec<ClientCommand>> {
    let mut out: BTreeMap<u64, Vec<ClientCommand>> = BTreeMap::new();
    for e in trace {
        if let Some((Source::External, cmd)) = e.client_command() {
            out.entry(e.tick).or_default().push(cmd);
        }
    }
    out
}
