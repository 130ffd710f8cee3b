use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    LocatedIn,
    SittingOn,
    Present,
    Absent,
    Entered,
    TempBand,
    Dark,
}

impl Predicate {
    pub fn as_str(self) -> &'static str {
        match self {
            Predicate::LocatedIn => "located-in",
            Predicate::SittingOn => "sitting-on",
            Predicate::Present => "present",
            Predicate::Absent => "absent",
            Predicate::Entered => "entered",
            Predicate::TempBand => "temp-band",
            Predicate::Dark => "dark",
        }
    }

    /// Facts derived from location readings (as opposed to scalar readings).
    pub fn is_locational(self) -> bool {
        !matches!(self, Predicate::TempBand | Predicate::Dark)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TempBand {
    Hot,
    Comfort,
    Cold,
}

impl TempBand {
    pub fn as_str(self) -> &'static str {
        match self {
            TempBand::Hot => "hot",
            TempBand::Comfort => "comfort",
            TempBand::Cold => "cold",
        }
    }
}

/// Object position of a fact. Its type is fixed by the predicate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Object {
    Id(String),
    Band(TempBand),
    Bool(bool),
}

/// Untyped object as it appears in documents, before the predicate assigns it a type.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub(crate) enum RawObject {
    Bool(bool),
    Text(String),
}

impl Object {
    pub(crate) fn typed(predicate: Predicate, raw: RawObject) -> Result<Object, String> {
        match (predicate, raw) {
            (Predicate::Dark, RawObject::Bool(b)) => Ok(Object::Bool(b)),
            (Predicate::TempBand, RawObject::Text(t)) => match t.as_str() {
                "hot" => Ok(Object::Band(TempBand::Hot)),
                "comfort" => Ok(Object::Band(TempBand::Comfort)),
                "cold" => Ok(Object::Band(TempBand::Cold)),
                _ => Err(format!("`{t}` is not a temperature band (hot, comfort, cold)")),
            },
            (Predicate::Dark | Predicate::TempBand, other) => Err(format!(
                "predicate `{predicate}` cannot take object {other:?}"
            )),
            (_, RawObject::Text(t)) => Ok(Object::Id(t)),
            (_, RawObject::Bool(b)) => Err(format!(
                "predicate `{predicate}` needs an identifier object, got {b}"
            )),
        }
    }

    pub fn as_id(&self) -> Option<&str> {
        match self {
            Object::Id(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Object::Id(s) => f.write_str(s),
            Object::Band(b) => f.write_str(b.as_str()),
            Object::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for Object {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Object::Id(id) => s.serialize_str(id),
            Object::Band(b) => s.serialize_str(b.as_str()),
            Object::Bool(b) => s.serialize_bool(*b),
        }
    }
}

/// A high-level `(subject, predicate, object)` statement about the home.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ContextFact {
    pub subject: String,
    pub predicate: Predicate,
    pub object: Object,
}

impl ContextFact {
    pub fn new(subject: impl Into<String>, predicate: Predicate, object: Object) -> Self {
        Self {
            subject: subject.into(),
            predicate,
            object,
        }
    }

    pub fn id(subject: impl Into<String>, predicate: Predicate, object: impl Into<String>) -> Self {
        Self::new(subject, predicate, Object::Id(object.into()))
    }
}

impl fmt::Display for ContextFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.predicate, self.object)
    }
}

impl<'de> Deserialize<'de> for ContextFact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            subject: String,
            predicate: Predicate,
            object: RawObject,
        }
        let raw = Raw::deserialize(d)?;
        let object = Object::typed(raw.predicate, raw.object).map_err(serde::de::Error::custom)?;
        Ok(ContextFact {
            subject: raw.subject,
            predicate: raw.predicate,
            object,
        })
    }
}

/// The facts derived at one tick, canonically ordered.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactSet {
    pub tick: u64,
    pub facts: BTreeSet<ContextFact>,
}

impl FactSet {
    pub fn new(tick: u64) -> Self {
        Self {
            tick,
            facts: BTreeSet::new(),
        }
    }

    pub fn from_facts(tick: u64, facts: impl IntoIterator<Item = ContextFact>) -> Self {
        Self {
            tick,
            facts: facts.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, fact: ContextFact) -> bool {
        self.facts.insert(fact)
    }

    pub fn contains(&self, fact: &ContextFact) -> bool {
        self.facts.contains(fact)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ContextFact> {
        self.facts.iter()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Facts in `self` but not in `prev`, and facts in `prev` but not in `self`.
    pub fn diff<'a>(&'a self, prev: &'a FactSet) -> (Vec<&'a ContextFact>, Vec<&'a ContextFact>) {
        (
            self.facts.difference(&prev.facts).collect(),
            prev.facts.difference(&self.facts).collect(),
        )
    }
}
