//! Dialogue states, transitions and the declarative trigger language.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::intent::{is_under, IntentResult};
use super::ModelError;

/// Context part of a state snapshot: the entities in play and the goal being pursued.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateContext {
    /// `Type=canonical value` strings of accumulated entities.
    pub entity_refs: BTreeSet<String>,
    pub goal_id: Option<String>,
}

/// Snapshot `(context, progress, external)` of a dialogue state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    pub id: String,
    pub context: StateContext,
    pub progress: BTreeMap<String, f64>,
    pub external_snapshot: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Respond,
    Clarify,
    Query,
    Refer,
    Terminate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

/// Conjunction of predicates over the current turn and the histories.
///
/// Empty clauses are vacuously true. `conversational`, `domain_under`,
/// `prior_domain` are any-of; the presence/completion clauses are all-of;
/// `no_prior_domain` requires that no earlier intent falls under any listed node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerCondition {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub conversational: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub domain_under: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub entities_present: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub milestones_complete: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub external_resolved: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub prior_domain: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub no_prior_domain: Vec<String>,
}

/// Everything a trigger may look at.
#[derive(Debug, Clone, Copy)]
pub struct TriggerContext<'a> {
    pub intent: &'a IntentResult,
    /// H_I entries before the current turn.
    pub prior_intents: &'a [IntentResult],
    pub entity_types: &'a BTreeSet<String>,
    pub completed_milestones: &'a BTreeSet<String>,
    pub resolved_externals: &'a BTreeSet<String>,
}

impl TriggerCondition {
    pub fn holds(&self, ctx: &TriggerContext<'_>) -> bool {
        let domain = ctx.intent.domain.as_deref();
        let under_any = |d: Option<&str>, nodes: &[String]| d.is_some_and(|d| nodes.iter().any(|n| is_under(d, n)));
        (self.conversational.is_empty() || self.conversational.contains(&ctx.intent.conversational))
            && (self.domain_under.is_empty() || under_any(domain, &self.domain_under))
            && self.entities_present.iter().all(|t| ctx.entity_types.contains(t))
            && self.milestones_complete.iter().all(|m| ctx.completed_milestones.contains(m))
            && self.external_resolved.iter().all(|e| ctx.resolved_externals.contains(e))
            && (self.prior_domain.is_empty()
                || ctx.prior_intents.iter().any(|i| under_any(i.domain.as_deref(), &self.prior_domain)))
            && !ctx.prior_intents.iter().any(|i| under_any(i.domain.as_deref(), &self.no_prior_domain))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: String,
    pub from_state: String,
    pub to_state: String,
    pub trigger: TriggerCondition,
    pub action: ActionSpec,
}

impl Transition {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.from_state == self.to_state && self.action.kind != ActionKind::Clarify {
            return Err(ModelError::Invalid(format!(
                "transition {} loops on {} but its action is not clarify",
                self.id, self.from_state
            )));
        }
        Ok(())
    }
}
