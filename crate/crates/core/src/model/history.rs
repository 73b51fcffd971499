//! Utterances and the four append-only conversation logs.

use serde::{Deserialize, Serialize};

use super::entity::EntitySet;
use super::intent::IntentResult;
use super::milestone::{ExternalKind, ExternalMilestone};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    System,
}

/// What a system utterance does in the conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceAct {
    UserInput,
    Response,
    /// Request for a missing milestone prerequisite.
    Clarification,
    /// Question about an unresolved external milestone.
    ExternalClarification,
    Referral,
    Farewell,
    Apology,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    /// Engine-assigned logical turn clock.
    pub timestamp: u64,
    pub speaker: Speaker,
    pub speaker_id: String,
    pub text: String,
    pub act: UtteranceAct,
}

impl Utterance {
    pub fn user(id: impl Into<String>, timestamp: u64, speaker_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            timestamp,
            speaker: Speaker::User,
            speaker_id: speaker_id.into(),
            text: text.into(),
            act: UtteranceAct::UserInput,
        }
    }

    pub fn system(id: impl Into<String>, timestamp: u64, text: impl Into<String>, act: UtteranceAct) -> Self {
        Self {
            id: id.into(),
            timestamp,
            speaker: Speaker::System,
            speaker_id: "system".to_string(),
            text: text.into(),
            act,
        }
    }
}

/// H_Mext entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalMilestoneEntry {
    pub timestamp: u64,
    pub milestone: ExternalMilestone,
}

/// H_C, H_I, H_E and H_Mext. Entries are only ever appended.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConversationHistory {
    pub utterances: Vec<Utterance>,
    pub intents: Vec<IntentResult>,
    pub entities: Vec<EntitySet>,
    pub ext_milestones: Vec<ExternalMilestoneEntry>,
}

impl ConversationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_timestamp(&self) -> Option<u64> {
        self.utterances.last().map(|u| u.timestamp)
    }

    pub fn append_utterance(&mut self, u: Utterance) -> Result<(), ModelError> {
        if let Some(last) = self.utterances.last() {
            if u.timestamp <= last.timestamp {
                return Err(ModelError::NonMonotonicTimestamp { last: last.timestamp, got: u.timestamp });
            }
            if u.speaker == Speaker::User && last.speaker == Speaker::User {
                return Err(ModelError::AlternationViolation { utterance_id: u.id });
            }
        }
        if self.utterances.iter().any(|x| x.id == u.id) {
            return Err(ModelError::DuplicateId(u.id));
        }
        self.utterances.push(u);
        Ok(())
    }

    fn user_utterance(&self, id: &str) -> Result<&Utterance, ModelError> {
        self.utterances
            .iter()
            .find(|u| u.id == id && u.speaker == Speaker::User)
            .ok_or_else(|| ModelError::DanglingReference(format!("user utterance {id}")))
    }

    pub fn append_intent(&mut self, intent: IntentResult) -> Result<(), ModelError> {
        self.user_utterance(&intent.utterance_id)?;
        if let Some(last) = self.intents.last() {
            if intent.timestamp < last.timestamp {
                return Err(ModelError::NonMonotonicTimestamp { last: last.timestamp, got: intent.timestamp });
            }
        }
        self.intents.push(intent);
        Ok(())
    }

    pub fn append_entities(&mut self, set: EntitySet) -> Result<(), ModelError> {
        self.user_utterance(&set.utterance_id)?;
        if let Some(last) = self.entities.last() {
            if set.timestamp < last.timestamp {
                return Err(ModelError::NonMonotonicTimestamp { last: last.timestamp, got: set.timestamp });
            }
        }
        self.entities.push(set);
        Ok(())
    }

    pub fn append_ext_milestone(&mut self, timestamp: u64, m: ExternalMilestone) -> Result<(), ModelError> {
        if self.contains_ext(m.kind, &m.description) {
            return Err(ModelError::DuplicateExternalMilestone(m.description));
        }
        if let Some(last) = self.ext_milestones.last() {
            if timestamp < last.timestamp {
                return Err(ModelError::NonMonotonicTimestamp { last: last.timestamp, got: timestamp });
            }
        }
        self.ext_milestones.push(ExternalMilestoneEntry { timestamp, milestone: m });
        Ok(())
    }

    pub fn contains_ext(&self, kind: ExternalKind, description: &str) -> bool {
        let key = super::entity::canonical_text(description);
        self.ext_milestones
            .iter()
            .any(|e| e.milestone.kind == kind && super::entity::canonical_text(&e.milestone.description) == key)
    }

    /// Every entity recorded so far, in log order.
    pub fn all_entities(&self) -> impl Iterator<Item = &super::entity::Entity> {
        self.entities.iter().flat_map(|s| s.entities.iter())
    }

    pub fn last_user_utterance(&self) -> Option<&Utterance> {
        self.utterances.iter().rev().find(|u| u.speaker == Speaker::User)
    }

    pub fn user_turns(&self) -> usize {
        self.utterances.iter().filter(|u| u.speaker == Speaker::User).count()
    }
}
