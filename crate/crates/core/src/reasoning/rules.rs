//! Edge-triggered condition→command rules.
//!
//! A rule is a conjunction of fact patterns (`when`), an optional list of
//! patterns that must match nothing (`unless`), and command templates. A
//! `(rule, binding)` pair fires on the tick its conditions become true; while
//! they stay true it stays quiet. Commands from all firings are then reduced
//! to one per `(appliance, property)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::home_server::{ApplianceKind, Command, Origin, Property, Setting};
use crate::model::FactorId;

use super::facts::{ContextFact, FactSet, Object, Predicate, RawObject};

/// Variable name (without the leading `?`) to bound value.
pub type Binding = BTreeMap<String, Object>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term<T> {
    Var(String),
    Lit(T),
}

impl<T> Term<T> {
    fn var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Lit(_) => None,
        }
    }
}

fn parse_var(s: &str) -> Option<String> {
    s.strip_prefix('?').map(str::to_owned)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub subject: Term<String>,
    pub predicate: Predicate,
    pub object: Term<Object>,
}

impl Pattern {
    fn vars(&self) -> impl Iterator<Item = &str> {
        self.subject.var().into_iter().chain(self.object.var())
    }

    /// Extends `binding` so that this pattern equals `fact`, if possible.
    fn unify(&self, fact: &ContextFact, binding: &Binding) -> Option<Binding> {
        if fact.predicate != self.predicate {
            return None;
        }
        let mut out = binding.clone();
        let subject = Object::Id(fact.subject.clone());
        for (term, value) in [
            (self.subject.as_object_term(), &subject),
            (self.object.clone(), &fact.object),
        ] {
            match term {
                Term::Lit(lit) if &lit != value => return None,
                Term::Lit(_) => {}
                Term::Var(v) => match out.get(&v) {
                    Some(bound) if bound != value => return None,
                    Some(_) => {}
                    None => {
                        out.insert(v, value.clone());
                    }
                },
            }
        }
        Some(out)
    }

    fn matches_any(&self, facts: &FactSet, binding: &Binding) -> bool {
        facts.iter().any(|f| self.unify(f, binding).is_some())
    }
}

impl Term<String> {
    fn as_object_term(&self) -> Term<Object> {
        match self {
            Term::Var(v) => Term::Var(v.clone()),
            Term::Lit(s) => Term::Lit(Object::Id(s.clone())),
        }
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (subject, predicate, object): (String, Predicate, RawObject) =
            Deserialize::deserialize(d)?;
        let subject = match parse_var(&subject) {
            Some(v) => Term::Var(v),
            None => Term::Lit(subject),
        };
        let object = match &object {
            RawObject::Text(t) if t.starts_with('?') => Term::Var(t[1..].to_owned()),
            _ => Term::Lit(Object::typed(predicate, object).map_err(serde::de::Error::custom)?),
        };
        Ok(Pattern {
            subject,
            predicate,
            object,
        })
    }
}

/// Which appliances an action addresses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Appliance(Term<String>),
    /// Every appliance matching the optional kind and space that accepts the property.
    Select {
        kind: Option<ApplianceKind>,
        space: Option<Term<String>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValueTemplate {
    Literal(Setting),
    /// Channel chosen for the bound person by the case base or their preference.
    ResolveChannel(Term<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionTemplate {
    pub target: Target,
    pub property: Property,
    pub value: ValueTemplate,
}

impl ActionTemplate {
    fn vars(&self) -> Vec<&str> {
        let mut v = Vec::new();
        match &self.target {
            Target::Appliance(t) => v.extend(t.var()),
            Target::Select { space, .. } => v.extend(space.as_ref().and_then(Term::var)),
        }
        if let ValueTemplate::ResolveChannel(t) = &self.value {
            v.extend(t.var());
        }
        v
    }
}

impl<'de> Deserialize<'de> for ActionTemplate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;

        #[derive(Deserialize)]
        #[serde(untagged)]
        enum RawTarget {
            Id(String),
            Select {
                #[serde(default)]
                kind: Option<ApplianceKind>,
                #[serde(default)]
                space: Option<String>,
            },
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct ResolveChannel {
            resolve_channel: String,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum RawValue {
            Resolve(ResolveChannel),
            Literal(serde_json::Value),
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            target: RawTarget,
            property: Property,
            value: RawValue,
        }

        let term = |s: String| match parse_var(&s) {
            Some(v) => Term::Var(v),
            None => Term::Lit(s),
        };
        let raw = Raw::deserialize(d)?;
        let target = match raw.target {
            RawTarget::Id(id) => Target::Appliance(term(id)),
            RawTarget::Select { kind, space } => Target::Select {
                kind,
                space: space.map(term),
            },
        };
        let value = match raw.value {
            RawValue::Resolve(r) if raw.property == Property::Channel => {
                ValueTemplate::ResolveChannel(term(r.resolve_channel))
            }
            RawValue::Resolve(_) => {
                return Err(D::Error::custom(
                    "resolve_channel can only supply the `channel` property",
                ))
            }
            RawValue::Literal(v) => {
                let setting: Setting = serde_json::from_value(serde_json::json!({
                    "property": raw.property,
                    "value": v,
                }))
                .map_err(|e| D::Error::custom(format!("bad value for `{}`: {e}", raw.property)))?;
                ValueTemplate::Literal(setting)
            }
        };
        Ok(ActionTemplate {
            target,
            property: raw.property,
            value,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub id: String,
    #[serde(default)]
    pub priority: i64,
    #[serde(rename = "when")]
    pub conditions: Vec<Pattern>,
    #[serde(default, rename = "unless")]
    pub negations: Vec<Pattern>,
    #[serde(rename = "then")]
    pub actions: Vec<ActionTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("duplicate rule id `{0}`")]
    DuplicateId(String),
    #[error("rule id `{0}` is reserved")]
    ReservedId(String),
    #[error("rule `{0}` needs at least one condition")]
    NoConditions(String),
    #[error("rule `{rule}` uses variable `?{var}` that no condition binds")]
    UnboundVariable { rule: String, var: String },
}

impl Rule {
    fn bound_vars(&self) -> BTreeSet<&str> {
        self.conditions.iter().flat_map(Pattern::vars).collect()
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        if Origin::RESERVED.contains(&self.id.as_str()) {
            return Err(RuleError::ReservedId(self.id.clone()));
        }
        if self.conditions.is_empty() {
            return Err(RuleError::NoConditions(self.id.clone()));
        }
        let bound = self.bound_vars();
        for var in self.actions.iter().flat_map(ActionTemplate::vars) {
            if !bound.contains(var) {
                return Err(RuleError::UnboundVariable {
                    rule: self.id.clone(),
                    var: var.to_owned(),
                });
            }
        }
        Ok(())
    }

    /// True when every condition holds under `binding` and no negation matches.
    pub fn holds(&self, binding: &Binding, facts: &FactSet) -> bool {
        self.conditions.iter().all(|p| p.matches_any(facts, binding))
            && !self.negations.iter().any(|p| p.matches_any(facts, binding))
    }
}

pub fn validate_rules(rules: &[Rule]) -> Result<(), RuleError> {
    let mut ids = BTreeSet::new();
    for rule in rules {
        if !ids.insert(rule.id.as_str()) {
            return Err(RuleError::DuplicateId(rule.id.clone()));
        }
        rule.validate()?;
    }
    Ok(())
}

/// All bindings under which the rule holds, in lexicographic order of bound values.
pub fn match_rule(rule: &Rule, facts: &FactSet) -> Vec<Binding> {
    let mut partial = vec![Binding::new()];
    for pattern in &rule.conditions {
        let mut next = Vec::new();
        for binding in &partial {
            next.extend(facts.iter().filter_map(|f| pattern.unify(f, binding)));
        }
        if next.is_empty() {
            return Vec::new();
        }
        partial = next;
    }
    let unique: BTreeSet<Binding> = partial
        .into_iter()
        .filter(|b| !rule.negations.iter().any(|p| p.matches_any(facts, b)))
        .collect();
    unique.into_iter().collect()
}

/// World knowledge the rule engine needs to turn templates into commands.
pub trait ActionContext {
    /// Appliances matching the filters that accept `property`, sorted by id.
    fn select(
        &self,
        kind: Option<ApplianceKind>,
        space: Option<&str>,
        property: Property,
    ) -> Vec<FactorId>;

    fn is_person(&self, id: &str) -> bool;

    fn resolve_channel(&self, person: &str) -> Option<u32>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Firing {
    pub rule: String,
    pub priority: i64,
    pub binding: Binding,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Evaluation {
    /// Rising-edge firings, sorted by rule id then binding.
    pub firings: Vec<Firing>,
    /// Conflict-resolved commands, sorted by `(appliance, property)`.
    pub commands: Vec<Command>,
    /// Winning commands dropped because the property is under a manual override.
    pub suppressed: Vec<Command>,
}

fn resolve_term<'a>(term: &'a Term<String>, binding: &'a Binding) -> Option<&'a str> {
    match term {
        Term::Lit(s) => Some(s),
        Term::Var(v) => binding.get(v).and_then(Object::as_id),
    }
}

fn instantiate(
    rule: &Rule,
    binding: &Binding,
    ctx: &dyn ActionContext,
) -> Vec<Command> {
    let subject = rule
        .conditions
        .iter()
        .filter_map(|p| resolve_term(&p.subject, binding))
        .find(|id| ctx.is_person(id))
        .map(FactorId::from);

    let mut out = Vec::new();
    for action in &rule.actions {
        let targets = match &action.target {
            Target::Appliance(t) => resolve_term(t, binding)
                .map(|id| vec![FactorId::from(id)])
                .unwrap_or_default(),
            Target::Select { kind, space } => {
                let space = match space {
                    Some(t) => match resolve_term(t, binding) {
                        Some(s) => Some(s),
                        None => continue,
                    },
                    None => None,
                };
                ctx.select(*kind, space, action.property)
            }
        };
        let (setting, on_behalf) = match &action.value {
            ValueTemplate::Literal(s) => (Some(*s), subject.clone()),
            ValueTemplate::ResolveChannel(person) => match resolve_term(person, binding) {
                Some(p) => (ctx.resolve_channel(p).map(Setting::Channel), Some(FactorId::from(p))),
                None => (None, None),
            },
        };
        let Some(setting) = setting else { continue };
        for appliance in targets {
            out.push(Command {
                appliance,
                setting,
                origin: Origin::Rule(rule.id.clone()),
                subject: on_behalf.clone(),
            });
        }
    }
    out
}

/// Fires every `(rule, binding)` whose conditions hold in `now` but not all
/// in `prev`, then keeps one command per `(appliance, property)`: highest
/// priority, ties to the smallest rule id, then to the earliest binding.
/// Winners whose property is locked are moved to `suppressed`.
pub fn evaluate(
    rules: &[Rule],
    prev: &FactSet,
    now: &FactSet,
    is_locked: &dyn Fn(&FactorId, Property) -> bool,
    ctx: &dyn ActionContext,
) -> Evaluation {
    let mut ordered: Vec<&Rule> = rules.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));

    let mut firings = Vec::new();
    for rule in ordered {
        for binding in match_rule(rule, now) {
            if rule.holds(&binding, prev) {
                continue;
            }
            let commands = instantiate(rule, &binding, ctx);
            firings.push(Firing {
                rule: rule.id.clone(),
                priority: rule.priority,
                binding,
                commands,
            });
        }
    }

    // Firings are already in (rule id, binding) order, so the first candidate
    // seen at a given priority is the tie-break winner.
    let mut winners: BTreeMap<(FactorId, Property), (i64, &Command)> = BTreeMap::new();
    for firing in &firings {
        for cmd in &firing.commands {
            match winners.get(&cmd.key()) {
                Some((p, _)) if *p >= firing.priority => {}
                _ => {
                    winners.insert(cmd.key(), (firing.priority, cmd));
                }
            }
        }
    }

    let mut commands = Vec::new();
    let mut suppressed = Vec::new();
    for ((appliance, property), (_, cmd)) in winners {
        if is_locked(&appliance, property) {
            suppressed.push(cmd.clone());
        } else {
            commands.push(cmd.clone());
        }
    }

    Evaluation {
        firings,
        commands,
        suppressed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::home_server::Power;
    use proptest::prelude::*;

    struct Ctx;

    impl ActionContext for Ctx {
        fn select(
            &self,
            kind: Option<ApplianceKind>,
            space: Option<&str>,
            property: Property,
        ) -> Vec<FactorId> {
            let all = [
                ("ac", ApplianceKind::AirConditioner, "living_room"),
                ("gate", ApplianceKind::Gate, "outside"),
                ("light_hall", ApplianceKind::Light, "hall"),
                ("light_living", ApplianceKind::Light, "living_room"),
                ("tv", ApplianceKind::Tv, "living_room"),
            ];
            all.iter()
                .filter(|(_, k, s)| {
                    kind.is_none_or(|want| want == *k)
                        && space.is_none_or(|want| want == *s)
                        && k.accepts(property)
                })
                .map(|(id, _, _)| FactorId::from(*id))
                .collect()
        }

        fn is_person(&self, id: &str) -> bool {
            matches!(id, "lee" | "anna")
        }

        fn resolve_channel(&self, person: &str) -> Option<u32> {
            match person {
                "lee" => Some(9),
                "anna" => Some(4),
                _ => None,
            }
        }
    }

    fn rule(json: &str) -> Rule {
        serde_json::from_str(json).unwrap()
    }

    fn canonical_rules() -> Vec<Rule> {
        [
            r#"{"id":"R1","priority":50,"when":[["?p","located-in","?s"],["?s","dark",true]],
                "then":[{"target":{"kind":"light","space":"?s"},"property":"power","value":"on"}]}"#,
            r#"{"id":"R2","priority":50,"when":[["?p","present","home"],["home","temp-band","hot"]],
                "then":[{"target":"ac","property":"mode","value":"cool"},
                        {"target":"ac","property":"setpoint","value":25},
                        {"target":"ac","property":"power","value":"on"}]}"#,
            r#"{"id":"R3","priority":40,"when":[["?p","sitting-on","sofa"]],
                "then":[{"target":"tv","property":"power","value":"on"},
                        {"target":"tv","property":"channel","value":{"resolve_channel":"?p"}}]}"#,
            r#"{"id":"R4","priority":100,"when":[["?p","absent","home"]],"unless":[["?q","present","home"]],
                "then":[{"target":{},"property":"power","value":"off"}]}"#,
        ]
        .into_iter()
        .map(rule)
        .collect()
    }

    fn facts(fs: &[ContextFact]) -> FactSet {
        FactSet::from_facts(0, fs.iter().cloned())
    }

    fn sits(p: &str) -> ContextFact {
        ContextFact::id(p, Predicate::SittingOn, "sofa")
    }

    fn unlocked(_: &FactorId, _: Property) -> bool {
        false
    }

    #[test]
    fn single_unifier() {
        let r = &canonical_rules()[2];
        let b = match_rule(r, &facts(&[sits("lee")]));
        assert_eq!(b, vec![Binding::from([("p".into(), Object::Id("lee".into()))])]);
        assert!(match_rule(r, &FactSet::default()).is_empty());
    }

    #[test]
    fn bindings_are_lexicographic() {
        let r = &canonical_rules()[2];
        let b = match_rule(r, &facts(&[sits("lee"), sits("anna")]));
        let names: Vec<_> = b.iter().map(|b| b["p"].to_string()).collect();
        assert_eq!(names, ["anna", "lee"]);
    }

    #[test]
    fn join_across_conditions() {
        let r = &canonical_rules()[0];
        let now = facts(&[
            ContextFact::id("lee", Predicate::LocatedIn, "living_room"),
            ContextFact::new("living_room", Predicate::Dark, Object::Bool(true)),
            ContextFact::new("hall", Predicate::Dark, Object::Bool(false)),
        ]);
        let b = match_rule(r, &now);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0]["s"], Object::Id("living_room".into()));
    }

    #[test]
    fn sofa_rising_edge_turns_on_tv_with_favorite() {
        let ev = evaluate(
            &canonical_rules(),
            &FactSet::default(),
            &facts(&[sits("lee")]),
            &unlocked,
            &Ctx,
        );
        assert_eq!(ev.firings.len(), 1);
        let got: Vec<_> = ev.commands.iter().map(|c| (c.appliance.as_str(), c.setting)).collect();
        assert_eq!(
            got,
            [("tv", Setting::Power(Power::On)), ("tv", Setting::Channel(9))]
        );
        assert_eq!(ev.commands[1].subject.as_ref().map(|s| s.as_str()), Some("lee"));
    }

    #[test]
    fn no_edge_no_command() {
        let both = facts(&[sits("lee")]);
        let ev = evaluate(&canonical_rules(), &both, &both, &unlocked, &Ctx);
        assert!(ev.firings.is_empty());
        assert!(ev.commands.is_empty());
    }

    #[test]
    fn departure_turns_everything_off() {
        let prev = facts(&[ContextFact::id("lee", Predicate::Present, "home")]);
        let now = facts(&[ContextFact::id("lee", Predicate::Absent, "home")]);
        let ev = evaluate(&canonical_rules(), &prev, &now, &unlocked, &Ctx);
        let ids: Vec<_> = ev.commands.iter().map(|c| c.appliance.as_str()).collect();
        assert_eq!(ids, ["ac", "light_hall", "light_living", "tv"]);
        assert!(ev
            .commands
            .iter()
            .all(|c| c.setting == Setting::Power(Power::Off)));
    }

    #[test]
    fn negation_blocks_all_off_while_someone_is_home() {
        let prev = facts(&[
            ContextFact::id("lee", Predicate::Present, "home"),
            ContextFact::id("anna", Predicate::Present, "home"),
        ]);
        let now = facts(&[
            ContextFact::id("lee", Predicate::Absent, "home"),
            ContextFact::id("anna", Predicate::Present, "home"),
        ]);
        assert!(evaluate(&canonical_rules(), &prev, &now, &unlocked, &Ctx)
            .firings
            .is_empty());
    }

    #[test]
    fn locked_commands_are_suppressed() {
        let locked = |a: &FactorId, p: Property| a.as_str() == "tv" && p == Property::Channel;
        let ev = evaluate(
            &canonical_rules(),
            &FactSet::default(),
            &facts(&[sits("lee")]),
            &locked,
            &Ctx,
        );
        assert_eq!(ev.commands.len(), 1);
        assert_eq!(ev.suppressed.len(), 1);
        assert_eq!(ev.suppressed[0].setting, Setting::Channel(9));
    }

    #[test]
    fn conflicts_resolve_by_priority_then_rule_id() {
        let rules = vec![
            rule(r#"{"id":"B","priority":10,"when":[["?p","sitting-on","sofa"]],
                "then":[{"target":"tv","property":"channel","value":5}]}"#),
            rule(r#"{"id":"A","priority":10,"when":[["?p","sitting-on","sofa"]],
                "then":[{"target":"tv","property":"channel","value":7}]}"#),
            rule(r#"{"id":"C","priority":3,"when":[["?p","sitting-on","sofa"]],
                "then":[{"target":"tv","property":"channel","value":1}]}"#),
        ];
        let ev = evaluate(&rules, &FactSet::default(), &facts(&[sits("lee")]), &unlocked, &Ctx);
        assert_eq!(ev.commands.len(), 1);
        assert_eq!(ev.commands[0].origin, Origin::Rule("A".into()));
        assert_eq!(ev.commands[0].setting, Setting::Channel(7));
    }

    #[test]
    fn rule_validation() {
        assert!(validate_rules(&canonical_rules()).is_ok());
        let unbound = rule(
            r#"{"id":"X","when":[["lee","sitting-on","sofa"]],
                "then":[{"target":"tv","property":"channel","value":{"resolve_channel":"?p"}}]}"#,
        );
        assert!(matches!(unbound.validate(), Err(RuleError::UnboundVariable { .. })));
        let mut dup = canonical_rules();
        dup.push(canonical_rules()[0].clone());
        assert_eq!(validate_rules(&dup), Err(RuleError::DuplicateId("R1".into())));
        let reserved = rule(r#"{"id":"override","when":[["?p","present","home"]],"then":[]}"#);
        assert!(matches!(reserved.validate(), Err(RuleError::ReservedId(_))));
    }

    #[test]
    fn malformed_rules_fail_to_parse() {
        for bad in [
            r#"{"id":"X","when":[["?p","levitating","sofa"]],"then":[]}"#,
            r#"{"id":"X","when":[["?s","dark","yes"]],"then":[]}"#,
            r#"{"id":"X","when":[["?p","present","home"]],"then":[{"target":"tv","property":"power","value":7}]}"#,
            r#"{"id":"X","when":[["?p","present","home"]],"then":[{"target":"tv","property":"power","value":{"resolve_channel":"?p"}}]}"#,
        ] {
            assert!(serde_json::from_str::<Rule>(bad).is_err(), "{bad}");
        }
    }

    fn fact_pool() -> Vec<ContextFact> {
        let mut pool = Vec::new();
        for p in ["anna", "bo", "lee"] {
            pool.push(ContextFact::id(p, Predicate::SittingOn, "sofa"));
            pool.push(ContextFact::id(p, Predicate::Present, "home"));
            pool.push(ContextFact::id(p, Predicate::Absent, "home"));
            pool.push(ContextFact::id(p, Predicate::LocatedIn, "living_room"));
            pool.push(ContextFact::id(p, Predicate::LocatedIn, "hall"));
        }
        pool.push(ContextFact::new("living_room", Predicate::Dark, Object::Bool(true)));
        pool.push(ContextFact::new("hall", Predicate::Dark, Object::Bool(true)));
        pool.push(ContextFact::new(
            "home",
            Predicate::TempBand,
            Object::Band(super::super::facts::TempBand::Hot),
        ));
        pool
    }

    proptest! {
        #[test]
        fn order_of_rules_does_not_matter(
            prev_mask in proptest::collection::vec(any::<bool>(), 18),
            now_mask in proptest::collection::vec(any::<bool>(), 18),
            perm in Just(canonical_rules()).prop_shuffle(),
        ) {
            let pool = fact_pool();
            let pick = |mask: &[bool]| FactSet::from_facts(
                0, pool.iter().zip(mask).filter(|(_, m)| **m).map(|(f, _)| f.clone()));
            let prev = pick(&prev_mask);
            let now = pick(&now_mask);
            let a = evaluate(&canonical_rules(), &prev, &now, &unlocked, &Ctx);
            let b = evaluate(&perm, &prev, &now, &unlocked, &Ctx);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn at_most_one_survivor_per_key(
            now_mask in proptest::collection::vec(any::<bool>(), 18),
        ) {
            let pool = fact_pool();
            let now = FactSet::from_facts(
                0, pool.iter().zip(&now_mask).filter(|(_, m)| **m).map(|(f, _)| f.clone()));
            let ev = evaluate(&canonical_rules(), &FactSet::default(), &now, &unlocked, &Ctx);
            let keys: BTreeSet<_> = ev.commands.iter().map(Command::key).collect();
            prop_assert_eq!(keys.len(), ev.commands.len());
        }
    }
}
