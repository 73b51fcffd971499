//! Deterministic natural-language understanding: intent recognition, entity
//! extraction and external-milestone detection behind a provider interface.

mod entities;
mod intent;
mod lexicon;
mod milestones;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use entities::extract_entities;
pub use intent::{conversational_scores, domain_scores, history_entity_types, recognize_intent};
pub use lexicon::{
    AmountRule, Fallbacks, GazetteerEntry, IntentRule, IntentTarget, Lexicon, PatternRule, LEXICON_VERSION,
};
pub use milestones::{
    detect_resolutions, extract_milestones, registration_milestones, MilestoneRule, MilestoneRules,
    MILESTONE_RULES_VERSION,
};

use crate::model::{
    ConversationHistory, EntitySet, ExternalMilestone, ExternalRegistry, IntentHierarchy, IntentResult, SessionConfig,
    Utterance,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NluError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid rule table: {0}")]
    Invalid(String),
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("intent hierarchy is empty")]
    EmptyHierarchy,
    #[error("utterance {0} is not a user utterance")]
    NotUserUtterance(String),
    #[error("provider {provider} does not declare capability {capability:?}")]
    Unsupported { provider: String, capability: Capability },
    #[error("provider failure: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Intent,
    Entity,
    Milestone,
}

/// Inputs to intent recognition.
#[derive(Debug, Clone, Copy)]
pub struct IntentRequest<'a> {
    pub utterance: &'a Utterance,
    pub hierarchy: &'a IntentHierarchy,
    pub history: &'a ConversationHistory,
    pub config: &'a SessionConfig,
    /// Hierarchy roots whose subtrees are excluded from the argmax.
    pub mask: &'a BTreeSet<String>,
}

/// External milestones first seen this turn, and registered ones the turn resolves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilestoneUpdate {
    pub new: Vec<ExternalMilestone>,
    pub resolved: Vec<String>,
}

/// A source of NLU answers. Implementations must be pure given their inputs.
///
/// Callers check [`NluProvider::capabilities`] through [`ensure_capability`]
/// before each call; the default method bodies report the capability missing.
pub trait NluProvider: Send + Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> BTreeSet<Capability>;

    fn recognize_intent(&self, _req: &IntentRequest<'_>) -> Result<IntentResult, NluError> {
        Err(self.unsupported(Capability::Intent))
    }

    fn extract_entities(&self, _u: &Utterance, _history: &ConversationHistory) -> Result<EntitySet, NluError> {
        Err(self.unsupported(Capability::Entity))
    }

    fn extract_milestones(
        &self,
        _u: &Utterance,
        _history: &ConversationHistory,
        _registry: &ExternalRegistry,
    ) -> Result<MilestoneUpdate, NluError> {
        Err(self.unsupported(Capability::Milestone))
    }

    /// External milestones implied by registration answers such as `"work authorization: yes"`.
    fn registration_milestones(&self, _facts: &BTreeSet<String>) -> Result<Vec<ExternalMilestone>, NluError> {
        Err(self.unsupported(Capability::Milestone))
    }

    fn unsupported(&self, capability: Capability) -> NluError {
        NluError::Unsupported { provider: self.name().to_string(), capability }
    }
}

pub fn ensure_capability(provider: &dyn NluProvider, capability: Capability) -> Result<(), NluError> {
    if provider.capabilities().contains(&capability) {
        Ok(())
    } else {
        Err(provider.unsupported(capability))
    }
}

/// The shipped rule-table provider, answering all three capabilities.
#[derive(Debug, Clone)]
pub struct RuleProvider {
    pub lexicon: Lexicon,
    pub milestone_rules: MilestoneRules,
}

impl NluProvider for RuleProvider {
    fn name(&self) -> &str {
        "rules"
    }

    fn capabilities(&self) -> BTreeSet<Capability> {
        [Capability::Intent, Capability::Entity, Capability::Milestone].into()
    }

    fn recognize_intent(&self, req: &IntentRequest<'_>) -> Result<IntentResult, NluError> {
        recognize_intent(&self.lexicon, req.utterance, req.hierarchy, req.history, req.config, req.mask)
    }

    fn extract_entities(&self, u: &Utterance, history: &ConversationHistory) -> Result<EntitySet, NluError> {
        extract_entities(&self.lexicon, u, history)
    }

    fn extract_milestones(
        &self,
        u: &Utterance,
        history: &ConversationHistory,
        registry: &ExternalRegistry,
    ) -> Result<MilestoneUpdate, NluError> {
        Ok(MilestoneUpdate {
            new: extract_milestones(&self.milestone_rules, u, history, registry)?,
            resolved: detect_resolutions(&self.milestone_rules, u, registry),
        })
    }

    fn registration_milestones(&self, facts: &BTreeSet<String>) -> Result<Vec<ExternalMilestone>, NluError> {
        registration_milestones(&self.milestone_rules, facts)
    }
}
