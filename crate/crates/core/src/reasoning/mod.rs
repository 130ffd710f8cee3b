//! Context abstraction, rules and the case base.

pub mod abstraction;
pub mod cbr;
pub mod facts;
pub mod rules;

pub use abstraction::{Abstractor, Thresholds};
pub use cbr::{Case, CaseAction, CaseBase, CbrError, Signature, Weights};
pub use facts::{ContextFact, FactSet, Object, Predicate, TempBand};
pub use rules::{evaluate, match_rule, ActionContext, Binding, Evaluation, Firing, Rule, RuleError};
