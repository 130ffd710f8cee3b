//! Case base for learned preferences.
//!
//! Cases map a context signature to a concrete appliance setting. Retrieval is
//! nearest-neighbour under weighted exact-match similarity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{TimeOfDay, Weather};
use crate::home_server::{Property, Setting};
use crate::model::FactorId;

pub const DEFAULT_THETA: f64 = 0.75;

/// Activity recorded for someone sitting in front of the TV.
pub const WATCHING_TV: &str = "watching-tv";

/// Feature name → value. Signatures compared against each other must share
/// their feature names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(pub BTreeMap<String, String>);

impl Signature {
    pub fn new<K: Into<String>, V: Into<String>>(features: impl IntoIterator<Item = (K, V)>) -> Self {
        Self(features.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }

    /// The standard `(person, activity, time_of_day, weather)` signature.
    pub fn context(person: &str, activity: &str, tod: TimeOfDay, weather: Weather) -> Self {
        Self::new([
            ("person", person.to_owned()),
            ("activity", activity.to_owned()),
            ("time_of_day", tod.as_str().to_owned()),
            ("weather", weather.as_str().to_owned()),
        ])
    }

    pub fn get(&self, feature: &str) -> Option<&str> {
        self.0.get(feature).map(String::as_str)
    }

    fn same_schema(&self, other: &Signature) -> bool {
        self.0.keys().eq(other.0.keys())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Weights {
    #[default]
    Uniform,
    PerFeature(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CbrError {
    #[error("signatures have different features: {0:?} vs {1:?}")]
    SchemaMismatch(Vec<String>, Vec<String>),
    #[error("weights must be finite, non-negative and not all zero")]
    InvalidWeights,
    #[error("no weight for feature `{0}`")]
    MissingWeight(String),
}

/// `Σ wᵢ·[aᵢ = bᵢ] / Σ wᵢ` over the shared features.
pub fn similarity(a: &Signature, b: &Signature, weights: &Weights) -> Result<f64, CbrError> {
    if !a.same_schema(b) {
        return Err(CbrError::SchemaMismatch(
            a.0.keys().cloned().collect(),
            b.0.keys().cloned().collect(),
        ));
    }
    let mut total = 0.0;
    let mut matched = 0.0;
    for (feature, value) in &a.0 {
        let w = match weights {
            Weights::Uniform => 1.0,
            Weights::PerFeature(ws) => *ws
                .get(feature)
                .ok_or_else(|| CbrError::MissingWeight(feature.clone()))?,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(CbrError::InvalidWeights);
        }
        total += w;
        if b.0.get(feature) == Some(value) {
            matched += w;
        }
    }
    if total <= 0.0 {
        return Err(CbrError::InvalidWeights);
    }
    Ok(matched / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseAction {
    pub appliance: FactorId,
    #[serde(flatten)]
    pub setting: Setting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub signature: Signature,
    pub action: CaseAction,
    #[serde(default)]
    pub retained_at: u64,
}

/// At most one case per signature, iterated in signature order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaseBase {
    cases: BTreeMap<Signature, Case>,
    weights: Weights,
}

impl CaseBase {
    pub fn new(weights: Weights) -> Self {
        Self {
            cases: BTreeMap::new(),
            weights,
        }
    }

    pub fn from_cases(weights: Weights, cases: impl IntoIterator<Item = Case>) -> Self {
        let mut base = Self::new(weights);
        for case in cases {
            base.retain(case);
        }
        base
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn cases(&self) -> impl Iterator<Item = &Case> {
        self.cases.values()
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Stores `case`, replacing any case with the same signature.
    pub fn retain(&mut self, case: Case) -> Option<Case> {
        self.cases.insert(case.signature.clone(), case)
    }

    pub fn retrieve(&self, sig: &Signature, theta: f64) -> Option<&Case> {
        self.retrieve_where(sig, theta, |_| true)
    }

    /// Most similar case accepted by `filter`, if its similarity is at least
    /// `theta`. Ties go to the latest `retained_at`, then to the smallest
    /// signature. Cases with a different feature schema are skipped.
    pub fn retrieve_where(
        &self,
        sig: &Signature,
        theta: f64,
        filter: impl Fn(&Case) -> bool,
    ) -> Option<&Case> {
        let mut best: Option<(f64, &Case)> = None;
        for case in self.cases.values().filter(|c| filter(c)) {
            let Ok(score) = similarity(sig, &case.signature, &self.weights) else {
                continue;
            };
            let better = match best {
                None => true,
                Some((s, b)) => score > s || (score == s && case.retained_at > b.retained_at),
            };
            if better {
                best = Some((score, case));
            }
        }
        best.filter(|(s, _)| *s >= theta).map(|(_, c)| c)
    }

    /// Channel from the best matching channel case, else `favorite`.
    pub fn resolve_channel(&self, sig: &Signature, theta: f64, favorite: Option<u32>) -> Option<u32> {
        let case = self.retrieve_where(sig, theta, |c| {
            c.action.setting.property() == Property::Channel
        });
        match case.map(|c| c.action.setting) {
            Some(Setting::Channel(ch)) => Some(ch),
            _ => favorite,
        }
    }
}
