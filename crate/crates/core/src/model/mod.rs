//! Data model of a milestone-driven conversation: histories, goals,
//! milestones, states, transitions, entities, intents and profiles.
//!
//! Types here carry invariants but no dialogue behaviour; construction,
//! validation and history appends are the only operations.

mod entity;
mod history;
mod intent;
mod milestone;
mod profile;
mod state;

pub use entity::{
    canonical_text, canonicalize, format_cents, Entity, EntityKey, EntityOrigin, EntityRequirement, EntitySet,
    EntityValue, INITIAL_ENTITY_PRIORITY,
};
pub use history::{ConversationHistory, ExternalMilestoneEntry, Speaker, Utterance, UtteranceAct};
pub use intent::{is_under, node_depth, IntentHierarchy, IntentNode, IntentResult, DEFAULT_CATEGORIES};
pub use milestone::{
    goal_achieved, ExternalKind, ExternalMilestone, ExternalRegistry, Goal, Milestone, REGISTRATION_SOURCE,
};
pub use profile::{EducationLevel, LanguageProficiency, PriorityWeights, ReadabilityLevel, SessionConfig, UserProfile};
pub use state::{ActionKind, ActionSpec, DialogueState, StateContext, Transition, TriggerCondition, TriggerContext};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("timestamp {got} does not follow {last}")]
    NonMonotonicTimestamp { last: u64, got: u64 },
    #[error("utterance {utterance_id} would follow another user turn without a system reply")]
    AlternationViolation { utterance_id: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("external milestone already recorded: {0}")]
    DuplicateExternalMilestone(String),
    #[error("invalid priority weights: {0}")]
    InvalidWeights(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
