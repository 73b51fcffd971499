//! User profile and per-session configuration.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EducationLevel {
    Basic,
    Intermediate,
    Advanced,
}

impl EducationLevel {
    pub fn score(self) -> f64 {
        match self {
            EducationLevel::Basic => 0.0,
            EducationLevel::Intermediate => 0.5,
            EducationLevel::Advanced => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageProficiency {
    Low,
    Medium,
    High,
}

/// Register a response is rendered in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadabilityLevel {
    Basic,
    Intermediate,
    Advanced,
}

impl ReadabilityLevel {
    pub const ALL: [ReadabilityLevel; 3] =
        [ReadabilityLevel::Basic, ReadabilityLevel::Intermediate, ReadabilityLevel::Advanced];

    pub fn as_str(self) -> &'static str {
        match self {
            ReadabilityLevel::Basic => "basic",
            ReadabilityLevel::Intermediate => "intermediate",
            ReadabilityLevel::Advanced => "advanced",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub education_level: EducationLevel,
    pub language_proficiency: LanguageProficiency,
    /// Registration answers such as `"work authorization: yes"`.
    #[serde(default)]
    pub registration_facts: BTreeSet<String>,
}

impl UserProfile {
    /// Education sets the register; low language proficiency drops it one level.
    pub fn readability(&self) -> ReadabilityLevel {
        let base = match self.education_level {
            EducationLevel::Basic => ReadabilityLevel::Basic,
            EducationLevel::Intermediate => ReadabilityLevel::Intermediate,
            EducationLevel::Advanced => ReadabilityLevel::Advanced,
        };
        match (self.language_proficiency, base) {
            (LanguageProficiency::Low, ReadabilityLevel::Advanced) => ReadabilityLevel::Intermediate,
            (LanguageProficiency::Low, _) => ReadabilityLevel::Basic,
            _ => base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityWeights {
    pub progress: f64,
    pub relevance: f64,
    pub external: f64,
}

impl PriorityWeights {
    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [self.progress, self.relevance, self.external];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ModelError::InvalidWeights(format!("{self:?}")));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

impl Default for PriorityWeights {
    fn default() -> Self {
        Self { progress: 0.4, relevance: 0.4, external: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub weights: PriorityWeights,
    /// Readiness threshold: below it queries are expanded, otherwise refined.
    pub tau: f64,
    pub drift_new_entity_ratio: f64,
    pub repeat_state_limit: u32,
    pub max_response_chunks: usize,
    /// Minimum domain score, in units of the lexicon's smallest rule weight.
    pub intent_floor: f64,
    /// Bonus per matching history entity type, in the same units.
    pub history_bonus: f64,
    /// How many prior user turns of H_E feed the intent context bonus; `None` is the whole session.
    pub history_window: Option<usize>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            weights: PriorityWeights::default(),
            tau: 0.5,
            drift_new_entity_ratio: 0.7,
            repeat_state_limit: 3,
            max_response_chunks: 4,
            intent_floor: 1.0,
            history_bonus: 1.0,
            history_window: None,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.weights.validate()?;
        if !self.tau.is_finite() {
            return Err(ModelError::Invalid("tau must be finite".into()));
        }
        if !(self.drift_new_entity_ratio > 0.0 && self.drift_new_entity_ratio <= 1.0) {
            return Err(ModelError::Invalid("drift_new_entity_ratio must be in (0, 1]".into()));
        }
        if self.repeat_state_limit == 0 || self.max_response_chunks == 0 {
            return Err(ModelError::Invalid("repeat_state_limit and max_response_chunks must be positive".into()));
        }
        if !(self.intent_floor.is_finite()
            && self.intent_floor >= 0.0
            && self.history_bonus.is_finite()
            && self.history_bonus >= 0.0)
        {
            return Err(ModelError::Invalid("intent_floor and history_bonus must be finite and non-negative".into()));
        }
        Ok(())
    }
}
