//! Session lifecycle: creation, turns, inspection and deletion.
//!
//! Turns of one session are serialized by that session's lock. Different
//! sessions proceed in parallel and share the immutable engine.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use mission_core::engine::{Engine, Session, SessionStatus, TurnOutcome};
use mission_core::model::{ConversationHistory, ExternalMilestone, SessionConfig, Speaker, UserProfile, Utterance};
use serde::{Deserialize, Serialize};

use crate::store::{valid_session_id, SnapshotStore};
use crate::ServiceError;

/// Internal milestone as shown to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneView {
    pub id: String,
    pub description: String,
    pub progress: f64,
    pub priority: f64,
}

/// What a client sees of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub status: SessionStatus,
    pub state: String,
    pub clock: u64,
    pub milestones: Vec<MilestoneView>,
    pub external_milestones: Vec<ExternalMilestone>,
    /// System utterances after the latest user utterance.
    pub last_responses: Vec<Utterance>,
}

impl SessionView {
    pub fn of(s: &Session) -> Self {
        let last_user = s.history.utterances.iter().rposition(|u| u.speaker == Speaker::User);
        let last_responses = match last_user {
            Some(i) => s.history.utterances[i + 1..].to_vec(),
            None => Vec::new(),
        };
        Self {
            session_id: s.id.clone(),
            status: s.status,
            state: s.state.id.clone(),
            clock: s.clock,
            milestones: s
                .milestones
                .values()
                .map(|m| MilestoneView {
                    id: m.id.clone(),
                    description: m.description.clone(),
                    progress: m.progress,
                    priority: m.priority,
                })
                .collect(),
            external_milestones: s.externals.milestones.values().cloned().collect(),
            last_responses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryView {
    pub session_id: String,
    pub status: SessionStatus,
    pub clock: u64,
    pub history: ConversationHistory,
}

type Handle = Arc<Mutex<Session>>;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

pub struct SessionService {
    engine: Arc<Engine>,
    store: Option<SnapshotStore>,
    default_config: SessionConfig,
    sessions: Mutex<HashMap<String, Handle>>,
}

impl SessionService {
    /// A service keeping sessions in memory only.
    pub fn in_memory(engine: Arc<Engine>, default_config: SessionConfig) -> Self {
        Self { engine, store: None, default_config, sessions: Mutex::new(HashMap::new()) }
    }

    /// A service that snapshots every session after each change and can pick
    /// up sessions saved by an earlier process.
    pub fn persistent(engine: Arc<Engine>, default_config: SessionConfig, store: SnapshotStore) -> Self {
        Self { engine, store: Some(store), default_config, sessions: Mutex::new(HashMap::new()) }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn default_config(&self) -> &SessionConfig {
        &self.default_config
    }

    fn persist(&self, s: &Session) -> Result<(), ServiceError> {
        match &self.store {
            Some(store) => store.save(s),
            None => Ok(()),
        }
    }

    /// Creates a session under a fresh random id.
    pub fn create_session(&self, profile: UserProfile, config: Option<SessionConfig>) -> Result<Session, ServiceError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.create_session_with_id(&id, profile, config)
    }

    pub fn create_session_with_id(
        &self,
        id: &str,
        profile: UserProfile,
        config: Option<SessionConfig>,
    ) -> Result<Session, ServiceError> {
        if !valid_session_id(id) {
            return Err(ServiceError::Config(format!("session id {id:?} may only use letters, digits, '-' and '_'")));
        }
        let session = self.engine.create_session(id, profile, config.unwrap_or_else(|| self.default_config.clone()))?;
        let mut map = lock(&self.sessions);
        let stored = match &self.store {
            Some(store) => store.load(id)?.is_some(),
            None => false,
        };
        if map.contains_key(id) || stored {
            return Err(ServiceError::Config(format!("session {id} already exists")));
        }
        self.persist(&session)?;
        map.insert(id.to_string(), Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    fn handle(&self, id: &str) -> Result<Handle, ServiceError> {
        let mut map = lock(&self.sessions);
        if let Some(h) = map.get(id) {
            return Ok(h.clone());
        }
        let loaded = match &self.store {
            Some(store) if valid_session_id(id) => store.load(id)?,
            _ => None,
        };
        let session = loaded.ok_or_else(|| ServiceError::UnknownSession(id.to_string()))?;
        let h = Arc::new(Mutex::new(session));
        map.insert(id.to_string(), h.clone());
        Ok(h)
    }

    /// Runs one user turn. The new snapshot is written before the outcome is
    /// returned; if writing fails the in-memory session is left as it was.
    pub fn post_utterance(&self, id: &str, text: &str) -> Result<TurnOutcome, ServiceError> {
        let h = self.handle(id)?;
        let mut live = lock(&h);
        let mut next = live.clone();
        let outcome = self.engine.step(&mut next, text).map_err(|e| ServiceError::from_engine(id, e))?;
        self.persist(&next)?;
        *live = next;
        Ok(outcome)
    }

    pub fn session(&self, id: &str) -> Result<Session, ServiceError> {
        let h = self.handle(id)?;
        let s = lock(&h).clone();
        Ok(s)
    }

    pub fn view(&self, id: &str) -> Result<SessionView, ServiceError> {
        let h = self.handle(id)?;
        let view = SessionView::of(&lock(&h));
        Ok(view)
    }

    pub fn history(&self, id: &str) -> Result<HistoryView, ServiceError> {
        let h = self.handle(id)?;
        let s = lock(&h);
        Ok(HistoryView { session_id: s.id.clone(), status: s.status, clock: s.clock, history: s.history.clone() })
    }

    /// Removes a session from memory and disk, returning its final view.
    pub fn delete(&self, id: &str) -> Result<SessionView, ServiceError> {
        let h = self.handle(id)?;
        let view = SessionView::of(&lock(&h));
        lock(&self.sessions).remove(id);
        if let Some(store) = &self.store {
            store.delete(id)?;
        }
        Ok(view)
    }
}
