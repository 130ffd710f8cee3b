//! The virtual home: a tree of spaces holding factors by aggregation.
//!
//! A space never owns its factors. Closing a space hands them to another
//! live space, so the set of factor ids only changes through
//! [`HomeModel::add_factor`] and [`HomeModel::remove_factor`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Rect};
use crate::home_server::{Appliance, ApplianceKind};

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

id_newtype!(
    /// Identifier of a [`VirtualSpace`].
    SpaceId
);
id_newtype!(
    /// Identifier of a [`Factor`] (person, appliance, furniture or environment).
    FactorId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    /// The root of the interior tree.
    Home,
    Room,
    /// Everything that is not inside the home.
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VirtualSpace {
    pub id: SpaceId,
    pub name: String,
    pub kind: SpaceKind,
    pub parent: Option<SpaceId>,
    pub bounds: Rect,
    pub window_factor: f64,
}

impl VirtualSpace {
    pub fn is_interior(&self) -> bool {
        self.kind != SpaceKind::Outside
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PreferenceValue {
    Integer(i64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Person {
    pub authenticated: bool,
    pub preferences: BTreeMap<String, PreferenceValue>,
    pub activity: Option<String>,
}

impl Person {
    pub const FAVORITE_CHANNEL: &'static str = "favorite_channel";

    pub fn favorite_channel(&self) -> Option<u32> {
        match self.preferences.get(Self::FAVORITE_CHANNEL)? {
            PreferenceValue::Integer(n) => u32::try_from(*n).ok().filter(|&c| c > 0),
            PreferenceValue::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Person,
    HomeAppliance,
    Furniture,
    Environment,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorBody {
    Person(Person),
    Appliance(Appliance),
    /// Passive anchor such as a sofa. Accepts no commands.
    Furniture,
    Environment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub id: FactorId,
    pub space: SpaceId,
    pub position: Point,
    pub body: FactorBody,
}

impl Factor {
    pub fn kind(&self) -> FactorKind {
        match self.body {
            FactorBody::Person(_) => FactorKind::Person,
            FactorBody::Appliance(_) => FactorKind::HomeAppliance,
            FactorBody::Furniture => FactorKind::Furniture,
            FactorBody::Environment => FactorKind::Environment,
        }
    }

    pub fn as_person(&self) -> Option<&Person> {
        match &self.body {
            FactorBody::Person(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_appliance(&self) -> Option<&Appliance> {
        match &self.body {
            FactorBody::Appliance(a) => Some(a),
            _ => None,
        }
    }
}

/// Declarative description of a home, as found in a scenario document.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeSpec {
    pub spaces: Vec<SpaceSpec>,
    #[serde(default)]
    pub factors: Vec<FactorSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub id: SpaceId,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub parent: Option<SpaceId>,
    #[serde(default)]
    pub outside: bool,
    pub bounds: Rect,
    #[serde(default = "default_window_factor")]
    pub window_factor: f64,
}

pub fn default_window_factor() -> f64 {
    0.002
}

#[derive(Debug, Clone, Deserialize)]
pub struct FactorSpec {
    pub id: FactorId,
    pub position: Point,
    /// Defaults to the deepest space containing `position`.
    #[serde(default)]
    pub space: Option<SpaceId>,
    #[serde(flatten)]
    pub body: FactorBodySpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorBodySpec {
    Person {
        #[serde(default)]
        credential: Option<String>,
        #[serde(default)]
        preferences: BTreeMap<String, PreferenceValue>,
    },
    Appliance {
        appliance: ApplianceKind,
        #[serde(default)]
        lamp_lux: Option<f64>,
    },
    Furniture,
    Environment,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("no root home space (a non-outside space without parent)")]
    MissingRoot,
    #[error("more than one root space: `{0}` and `{1}`")]
    MultipleRoots(SpaceId, SpaceId),
    #[error("no outside space")]
    MissingOutside,
    #[error("more than one outside space: `{0}` and `{1}`")]
    MultipleOutside(SpaceId, SpaceId),
    #[error("outside space `{0}` cannot have a parent or children")]
    OutsideInTree(SpaceId),
    #[error("home needs at least one interior room below the root")]
    NoInteriorSpace,
    #[error("sibling spaces `{0}` and `{1}` overlap")]
    OverlappingSiblings(SpaceId, SpaceId),
    #[error("space `{child}` escapes the bounds of its parent `{parent}`")]
    ChildEscapesParent { child: SpaceId, parent: SpaceId },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("space `{0}` is not reachable from the root")]
    Unreachable(SpaceId),
    #[error("window factor of `{0}` must lie in [0, 1]")]
    InvalidWindowFactor(SpaceId),
    #[error("factor `{factor}` at ({x}, {y}) lies outside space `{space}`")]
    FactorOutOfBounds {
        factor: FactorId,
        space: SpaceId,
        x: f64,
        y: f64,
    },
    #[error("invalid factor `{0}`: {1}")]
    InvalidFactor(FactorId, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("`{0}` not found")]
    NotFound(String),
    #[error("the root and outside spaces cannot be closed")]
    CannotCloseRoot,
    #[error("relocation target `{0}` is the space being closed")]
    TargetIsClosing(SpaceId),
    #[error("`{0}` is not authenticated and cannot enter the home")]
    Unauthorized(FactorId),
    #[error("point ({0}, {1}) lies outside every space")]
    OutOfBounds(String, String),
    #[error("factor `{0}` already exists")]
    DuplicateFactor(FactorId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomeModel {
    spaces: BTreeMap<SpaceId, VirtualSpace>,
    root: SpaceId,
    outside: SpaceId,
    factors: BTreeMap<FactorId, Factor>,
    auth_registry: BTreeMap<FactorId, String>,
}

impl HomeModel {
    /// Validates `spec` and builds the home with every declared factor placed.
    pub fn build(spec: &HomeSpec) -> Result<Self, SpecError> {
        let mut spaces = BTreeMap::new();
        let mut root: Option<SpaceId> = None;
        let mut outside: Option<SpaceId> = None;

        for s in &spec.spaces {
            if !(0.0..=1.0).contains(&s.window_factor) {
                return Err(SpecError::InvalidWindowFactor(s.id.clone()));
            }
            let kind = match (s.outside, &s.parent) {
                (true, Some(_)) => return Err(SpecError::OutsideInTree(s.id.clone())),
                (true, None) => {
                    if let Some(prev) = outside.replace(s.id.clone()) {
                        return Err(SpecError::MultipleOutside(prev, s.id.clone()));
                    }
                    SpaceKind::Outside
                }
                (false, None) => {
                    if let Some(prev) = root.replace(s.id.clone()) {
                        return Err(SpecError::MultipleRoots(prev, s.id.clone()));
                    }
                    SpaceKind::Home
                }
                (false, Some(_)) => SpaceKind::Room,
            };
            let space = VirtualSpace {
                id: s.id.clone(),
                name: s.name.clone().unwrap_or_else(|| s.id.to_string()),
                kind,
                parent: s.parent.clone(),
                bounds: s.bounds,
                window_factor: s.window_factor,
            };
            if spaces.insert(s.id.clone(), space).is_some() {
                return Err(SpecError::DuplicateId(s.id.to_string()));
            }
        }

        let root = root.ok_or(SpecError::MissingRoot)?;
        let outside = outside.ok_or(SpecError::MissingOutside)?;

        for space in spaces.values() {
            let Some(parent_id) = &space.parent else {
                continue;
            };
            let parent = spaces.get(parent_id).ok_or_else(|| {
                SpecError::DanglingReference(format!(
                    "space `{}` names unknown parent `{parent_id}`",
                    space.id
                ))
            })?;
            if parent.kind == SpaceKind::Outside {
                return Err(SpecError::OutsideInTree(parent.id.clone()));
            }
            if !parent.bounds.contains_rect(&space.bounds) {
                return Err(SpecError::ChildEscapesParent {
                    child: space.id.clone(),
                    parent: parent_id.clone(),
                });
            }
        }

        // Every room must reach the root by following parents; a cycle never does.
        for space in spaces.values().filter(|s| s.kind == SpaceKind::Room) {
            let mut cursor = space.parent.clone();
            let mut steps = 0;
            while let Some(id) = cursor {
                if id == root {
                    break;
                }
                steps += 1;
                if steps > spaces.len() {
                    return Err(SpecError::Unreachable(space.id.clone()));
                }
                cursor = spaces[&id].parent.clone();
            }
        }

        let rooms: Vec<&VirtualSpace> = spaces.values().filter(|s| s.parent.is_some()).collect();
        if !rooms.iter().any(|s| s.parent.as_ref() == Some(&root)) {
            return Err(SpecError::NoInteriorSpace);
        }
        for (i, a) in rooms.iter().enumerate() {
            for b in &rooms[i + 1..] {
                if a.parent == b.parent && a.bounds.overlaps(&b.bounds) {
                    return Err(SpecError::OverlappingSiblings(a.id.clone(), b.id.clone()));
                }
            }
        }

        let mut home = HomeModel {
            spaces,
            root,
            outside,
            factors: BTreeMap::new(),
            auth_registry: BTreeMap::new(),
        };

        for f in &spec.factors {
            if !f.position.is_finite() {
                return Err(SpecError::InvalidFactor(
                    f.id.clone(),
                    "position must be finite".into(),
                ));
            }
            let space = match &f.space {
                Some(s) => {
                    if !home.spaces.contains_key(s) {
                        return Err(SpecError::DanglingReference(format!(
                            "factor `{}` names unknown space `{s}`",
                            f.id
                        )));
                    }
                    s.clone()
                }
                None => home.space_of_point(&f.position),
            };
            if !home.spaces[&space].bounds.contains(&f.position) {
                return Err(SpecError::FactorOutOfBounds {
                    factor: f.id.clone(),
                    space,
                    x: f.position.x,
                    y: f.position.y,
                });
            }
            let body = match &f.body {
                FactorBodySpec::Person {
                    credential,
                    preferences,
                } => {
                    if let Some(secret) = credential {
                        home.auth_registry.insert(f.id.clone(), secret.clone());
                    }
                    FactorBody::Person(Person {
                        authenticated: false,
                        preferences: preferences.clone(),
                        activity: None,
                    })
                }
                FactorBodySpec::Appliance { appliance, lamp_lux } => {
                    let appliance = Appliance::new(*appliance, *lamp_lux)
                        .map_err(|e| SpecError::InvalidFactor(f.id.clone(), e))?;
                    FactorBody::Appliance(appliance)
                }
                FactorBodySpec::Furniture => FactorBody::Furniture,
                FactorBodySpec::Environment => FactorBody::Environment,
            };
            let factor = Factor {
                id: f.id.clone(),
                space,
                position: f.position,
                body,
            };
            home.add_factor(factor)
                .map_err(|_| SpecError::DuplicateId(f.id.to_string()))?;
        }

        Ok(home)
    }

    pub fn root(&self) -> &SpaceId {
        &self.root
    }

    pub fn outside(&self) -> &SpaceId {
        &self.outside
    }

    pub fn space(&self, id: &str) -> Option<&VirtualSpace> {
        self.spaces.get(id)
    }

    pub fn spaces(&self) -> impl Iterator<Item = &VirtualSpace> {
        self.spaces.values()
    }

    pub fn space_count(&self) -> usize {
        self.spaces.len()
    }

    pub fn interior_spaces(&self) -> impl Iterator<Item = &VirtualSpace> {
        self.spaces.values().filter(|s| s.is_interior())
    }

    pub fn is_interior(&self, id: &str) -> bool {
        self.spaces.get(id).is_some_and(VirtualSpace::is_interior)
    }

    pub fn children<'a>(&'a self, id: &'a SpaceId) -> impl Iterator<Item = &'a VirtualSpace> + 'a {
        self.spaces
            .values()
            .filter(move |s| s.parent.as_ref() == Some(id))
    }

    /// `id` itself plus every space below it.
    pub fn subtree(&self, id: &SpaceId) -> BTreeSet<SpaceId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![id.clone()];
        while let Some(cur) = stack.pop() {
            if out.insert(cur.clone()) {
                stack.extend(self.children(&cur).map(|c| c.id.clone()));
            }
        }
        out
    }

    pub fn factor(&self, id: &str) -> Option<&Factor> {
        self.factors.get(id)
    }

    pub fn factor_mut(&mut self, id: &str) -> Option<&mut Factor> {
        self.factors.get_mut(id)
    }

    pub fn factors(&self) -> impl Iterator<Item = &Factor> {
        self.factors.values()
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn factors_in<'a>(&'a self, space: &'a SpaceId) -> impl Iterator<Item = &'a Factor> + 'a {
        self.factors.values().filter(move |f| &f.space == space)
    }

    pub fn persons(&self) -> impl Iterator<Item = (&Factor, &Person)> {
        self.factors
            .values()
            .filter_map(|f| f.as_person().map(|p| (f, p)))
    }

    pub fn person_mut(&mut self, id: &str) -> Option<&mut Person> {
        match &mut self.factors.get_mut(id)?.body {
            FactorBody::Person(p) => Some(p),
            _ => None,
        }
    }

    pub fn appliances(&self) -> impl Iterator<Item = (&Factor, &Appliance)> {
        self.factors
            .values()
            .filter_map(|f| f.as_appliance().map(|a| (f, a)))
    }

    pub fn appliance_mut(&mut self, id: &str) -> Option<&mut Appliance> {
        match &mut self.factors.get_mut(id)?.body {
            FactorBody::Appliance(a) => Some(a),
            _ => None,
        }
    }

    pub fn furniture(&self) -> impl Iterator<Item = &Factor> {
        self.factors
            .values()
            .filter(|f| matches!(f.body, FactorBody::Furniture))
    }

    pub fn credential(&self, person: &str) -> Option<&str> {
        self.auth_registry.get(person).map(String::as_str)
    }

    pub fn add_factor(&mut self, factor: Factor) -> Result<(), ModelError> {
        let space = self
            .spaces
            .get(&factor.space)
            .ok_or_else(|| ModelError::NotFound(factor.space.to_string()))?;
        if !space.bounds.contains(&factor.position) {
            return Err(ModelError::OutOfBounds(
                factor.position.x.to_string(),
                factor.position.y.to_string(),
            ));
        }
        if self.factors.contains_key(&factor.id) {
            return Err(ModelError::DuplicateFactor(factor.id));
        }
        self.factors.insert(factor.id.clone(), factor);
        Ok(())
    }

    pub fn remove_factor(&mut self, id: &str) -> Result<Factor, ModelError> {
        self.auth_registry.remove(id);
        self.factors
            .remove(id)
            .ok_or_else(|| ModelError::NotFound(id.to_owned()))
    }

    /// Deepest interior space containing `p`, or the outside space.
    ///
    /// Points on a boundary shared by siblings go to the sibling with the
    /// lexicographically smallest id.
    pub fn space_of_point(&self, p: &Point) -> SpaceId {
        let root = &self.spaces[&self.root];
        if !root.bounds.contains(p) {
            return self.outside.clone();
        }
        let mut current = &root.id;
        // BTreeMap iteration is ordered by id, so the first hit is the tie winner.
        while let Some(child) = self.children(current).find(|c| c.bounds.contains(p)) {
            current = &child.id;
        }
        current.clone()
    }

    /// Removes `space_id` from the tree, moving its factors into
    /// `relocation_target` (clamped to the target's bounds) and its child
    /// spaces under its former parent.
    pub fn close_space(
        &mut self,
        space_id: &str,
        relocation_target: &str,
    ) -> Result<(), ModelError> {
        let closing = self
            .spaces
            .get(space_id)
            .ok_or_else(|| ModelError::NotFound(space_id.to_owned()))?;
        if closing.kind != SpaceKind::Room {
            return Err(ModelError::CannotCloseRoot);
        }
        if space_id == relocation_target {
            return Err(ModelError::TargetIsClosing(closing.id.clone()));
        }
        let target = self
            .spaces
            .get(relocation_target)
            .ok_or_else(|| ModelError::NotFound(relocation_target.to_owned()))?;
        let target_id = target.id.clone();
        let target_bounds = target.bounds;

        let closing = self.spaces.remove(space_id).expect("checked above");
        for child in self.spaces.values_mut() {
            if child.parent.as_ref() == Some(&closing.id) {
                child.parent = closing.parent.clone();
            }
        }
        for factor in self.factors.values_mut() {
            if factor.space == closing.id {
                factor.space = target_id.clone();
                factor.position = target_bounds.clamp(&factor.position);
            }
        }
        Ok(())
    }

    /// Teleports a person to `target`. Entering the home from outside
    /// requires a prior successful authentication; leaving it clears it.
    pub fn move_person(&mut self, person_id: &str, target: Point) -> Result<(), ModelError> {
        let factor = self
            .factors
            .get(person_id)
            .ok_or_else(|| ModelError::NotFound(person_id.to_owned()))?;
        let FactorBody::Person(person) = &factor.body else {
            return Err(ModelError::NotFound(format!("person {person_id}")));
        };
        if !target.is_finite() {
            return Err(ModelError::OutOfBounds(
                target.x.to_string(),
                target.y.to_string(),
            ));
        }
        let dest = self.space_of_point(&target);
        if dest == self.outside && !self.spaces[&dest].bounds.contains(&target) {
            return Err(ModelError::OutOfBounds(
                target.x.to_string(),
                target.y.to_string(),
            ));
        }
        let from_outside = factor.space == self.outside;
        let to_outside = dest == self.outside;
        if from_outside && !to_outside && !person.authenticated {
            return Err(ModelError::Unauthorized(factor.id.clone()));
        }

        let factor = self.factors.get_mut(person_id).expect("checked above");
        factor.space = dest;
        factor.position = target;
        if !from_outside && to_outside {
            if let FactorBody::Person(p) = &mut factor.body {
                p.authenticated = false;
            }
        }
        Ok(())
    }
}
