//! The conversation loop: per-turn orchestration of milestone tracking,
//! intent and entity recognition, state transitions, gating, retrieval,
//! response generation, priority updates, query adaptation and drift.

mod machine;
mod policy;
mod session;

pub use machine::{Machine, StateDef, MACHINE_VERSION};
pub use policy::{
    combine_priority, detect_drift, find_missing_information, intent_goal, intent_mask, next_entity_priority,
    prioritize_milestone, priority_components, select_transition, state_priority, update_entity_priorities, DriftFlag,
    DriftInput, MissingRequirement, PriorityComponents, PriorityContext, ENTITY_DECAY, ENTITY_IDLE_TURNS,
    ENTITY_PRIORITY_FLOOR, ENTITY_REFERENCE_BONUS,
};
pub use session::{
    entity_ref, AdaptationCarry, AdaptationRecord, Engine, FixtureSources, Session, SessionStatus, TurnDecisions,
    TurnOutcome,
};

use crate::kb::KbError;
use crate::model::ModelError;
use crate::nlu::NluError;
use crate::response::ResponseError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid machine: {0}")]
    Invalid(String),
    #[error("{file}: {message}")]
    FixtureLoad { file: String, message: String },
    #[error("session is {0}, not active")]
    SessionNotActive(SessionStatus),
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nlu(#[from] NluError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Response(#[from] ResponseError),
}
