//! Goals, internal milestones and external milestones.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::entity::{canonical_text, Entity, EntityRequirement};
use super::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub id: String,
    pub description: String,
    pub subgoal_ids: BTreeSet<String>,
    pub external_dep_ids: BTreeSet<String>,
    pub achieved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub id: String,
    pub description: String,
    pub prerequisites: Vec<EntityRequirement>,
    pub progress: f64,
    pub priority: f64,
}

impl Milestone {
    pub fn is_complete(&self) -> bool {
        self.progress >= 1.0
    }

    /// Ratio of satisfied prerequisites. A milestone without prerequisites keeps
    /// whatever progress was set explicitly.
    pub fn satisfaction_ratio<'a>(&self, entities: impl Iterator<Item = &'a Entity> + Clone) -> f64 {
        if self.prerequisites.is_empty() {
            return self.progress;
        }
        let met = self.prerequisites.iter().filter(|p| p.satisfied_in(entities.clone())).count();
        met as f64 / self.prerequisites.len() as f64
    }

    pub fn recompute_progress<'a>(&mut self, entities: impl Iterator<Item = &'a Entity> + Clone) {
        self.progress = self.satisfaction_ratio(entities);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalKind {
    UserState,
    Business,
}

impl ExternalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExternalKind::UserState => "user_state",
            ExternalKind::Business => "business",
        }
    }
}

/// Source id recorded for milestones seeded from registration data.
pub const REGISTRATION_SOURCE: &str = "registration";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalMilestone {
    pub id: String,
    pub kind: ExternalKind,
    pub description: String,
    pub resolved: bool,
    pub source_utterance_id: Option<String>,
    pub clarified: bool,
}

impl ExternalMilestone {
    /// Stable id derived from (kind, canonical description).
    pub fn id_for(kind: ExternalKind, description: &str) -> String {
        let slug = canonical_text(description)
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { '-' })
            .collect::<String>()
            .split('-')
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("-");
        format!("ext:{}:{}", kind.as_str(), slug)
    }

    pub fn new(kind: ExternalKind, description: &str, resolved: bool, source: Option<String>) -> Self {
        Self {
            id: Self::id_for(kind, description),
            kind,
            description: canonical_text(description),
            resolved,
            source_utterance_id: source,
            clarified: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.resolved && self.source_utterance_id.is_none() {
            return Err(ModelError::Invalid(format!("resolved external milestone {} has no source", self.id)));
        }
        Ok(())
    }
}

/// M_ext plus the catalog of external milestones goals may depend on before
/// they have been observed in conversation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalRegistry {
    pub known: BTreeSet<String>,
    pub milestones: BTreeMap<String, ExternalMilestone>,
}

impl ExternalRegistry {
    /// `Some(resolved)` for registered or cataloged ids, `None` for unknown ids.
    pub fn resolution(&self, id: &str) -> Option<bool> {
        match self.milestones.get(id) {
            Some(m) => Some(m.resolved),
            None if self.known.contains(id) => Some(false),
            None => None,
        }
    }

    pub fn is_resolved(&self, id: &str) -> bool {
        self.resolution(id).unwrap_or(false)
    }

    /// Adds a milestone; returns false when (kind, description) is already present.
    pub fn insert(&mut self, m: ExternalMilestone) -> bool {
        if self.milestones.contains_key(&m.id) {
            return false;
        }
        self.milestones.insert(m.id.clone(), m);
        true
    }

    /// Marks a milestone resolved. Resolution never reverts.
    pub fn resolve(&mut self, id: &str, source: &str) -> bool {
        match self.milestones.get_mut(id) {
            Some(m) if !m.resolved => {
                m.resolved = true;
                m.source_utterance_id = Some(source.to_string());
                true
            }
            _ => false,
        }
    }
}

/// True iff every subgoal is at full progress and every external dependency is resolved.
pub fn goal_achieved(
    goal: &Goal,
    milestones: &BTreeMap<String, Milestone>,
    externals: &ExternalRegistry,
) -> Result<bool, ModelError> {
    let mut all = true;
    for id in &goal.subgoal_ids {
        let m = milestones
            .get(id)
            .ok_or_else(|| ModelError::DanglingReference(format!("milestone {id} in goal {}", goal.id)))?;
        all &= m.is_complete();
    }
    for id in &goal.external_dep_ids {
        let resolved = externals
            .resolution(id)
            .ok_or_else(|| ModelError::DanglingReference(format!("external milestone {id} in goal {}", goal.id)))?;
        all &= resolved;
    }
    Ok(all)
}
