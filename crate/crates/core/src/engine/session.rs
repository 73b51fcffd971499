//! Sessions and the per-turn conversation loop.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::machine::{Machine, StateDef};
use super::policy::{
    detect_drift, find_missing_information, intent_goal, intent_mask, prioritize_milestone, select_transition,
    update_entity_priorities, DriftFlag, DriftInput, MissingRequirement, PriorityContext,
};
use super::EngineError;
use crate::fixtures;
use crate::kb::{
    adapt_query, choose_adaptation, construct_query_graph, estimate_readiness, retrieve_facts, AdaptDecision, FactSet,
    KbError, KnowledgeGraph, QueryGraph, QueryTemplates, Scalar,
};
use crate::model::{
    goal_achieved, ConversationHistory, DialogueState, Entity, EntityKey, EntityOrigin, EntitySet, EntityValue,
    ExternalRegistry, Goal, IntentHierarchy, IntentResult, Milestone, SessionConfig, Speaker, StateContext, Transition,
    TriggerContext, UserProfile, Utterance, UtteranceAct,
};
use crate::nlu::{ensure_capability, Capability, IntentRequest, Lexicon, MilestoneRules, NluProvider, RuleProvider};
use crate::response::{compose_turn, get_clarification, ClarificationItem, ResponseLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Referred,
    Terminated,
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionStatus::Active => "active",
            SessionStatus::Referred => "referred",
            SessionStatus::Terminated => "terminated",
        })
    }
}

/// The adaptation chosen at the end of a turn, applied to the next turn's
/// queries built from the same templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationCarry {
    pub decision: AdaptDecision,
    pub template_ids: BTreeSet<String>,
}

/// Everything that changes over a conversation. Serializes to a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub profile: UserProfile,
    pub config: SessionConfig,
    pub status: SessionStatus,
    pub history: ConversationHistory,
    pub goals: BTreeMap<String, Goal>,
    pub milestones: BTreeMap<String, Milestone>,
    pub externals: ExternalRegistry,
    /// Accumulated entities with their current priorities, in first-seen order.
    pub entities: Vec<Entity>,
    pub state: DialogueState,
    /// Logical clock; every utterance advances it by one.
    pub clock: u64,
    /// Consecutive user turns without a state change, the latest included.
    pub unchanged_turns: u32,
    /// Hierarchy subtrees excluded from the next intent recognition.
    pub mask: BTreeSet<String>,
    pub carry: Option<AdaptationCarry>,
}

/// Version written into every session snapshot.
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize)]
struct SnapshotOut<'a> {
    version: u32,
    session: &'a Session,
}

#[derive(Deserialize)]
struct SnapshotIn {
    version: u32,
    session: Session,
}

impl Session {
    /// The versioned snapshot document for this session.
    pub fn to_json(&self) -> Result<String, EngineError> {
        serde_json::to_string_pretty(&SnapshotOut { version: SNAPSHOT_VERSION, session: self })
            .map_err(|e| EngineError::Snapshot(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        let doc: SnapshotIn = serde_json::from_str(text).map_err(|e| EngineError::Snapshot(e.to_string()))?;
        if doc.version != SNAPSHOT_VERSION {
            return Err(EngineError::Snapshot(format!("unsupported snapshot version {}", doc.version)));
        }
        Ok(doc.session)
    }

    pub fn user_turns(&self) -> usize {
        self.history.user_turns()
    }

    /// Texts of the user turns so far, the session's event log.
    pub fn user_texts(&self) -> Vec<String> {
        self.history.utterances.iter().filter(|u| u.speaker == Speaker::User).map(|u| u.text.clone()).collect()
    }

    fn entity_types(&self) -> BTreeSet<String> {
        self.entities.iter().map(|e| e.entity_type.clone()).collect()
    }

    /// Display of the first entity seen per type.
    fn entity_context(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for e in &self.entities {
            out.entry(e.entity_type.clone()).or_insert_with(|| e.display.clone());
        }
        out
    }

    fn emit(&mut self, out: &mut Vec<Utterance>, text: String, act: UtteranceAct) -> Result<(), EngineError> {
        self.clock += 1;
        let u = Utterance::system(format!("r{}", self.clock), self.clock, text, act);
        self.history.append_utterance(u.clone())?;
        out.push(u);
        Ok(())
    }
}

pub fn entity_ref(e: &Entity) -> String {
    format!("{}={}", e.entity_type, e.value.canonical_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationRecord {
    /// Readiness estimate compared against the session threshold.
    pub readiness: f64,
    pub chosen: AdaptDecision,
    /// What the next turn will apply: `no_change` when the chosen operator had nothing to act on.
    pub effective: AdaptDecision,
}

/// Observable trace of one turn's decisions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurnDecisions {
    pub intent: Option<IntentResult>,
    pub entities: Vec<String>,
    pub new_entities: Vec<String>,
    pub derived_entities: Vec<String>,
    pub milestones_added: Vec<String>,
    pub milestones_resolved: Vec<String>,
    pub external_clarifications: Vec<String>,
    pub missing: Vec<MissingRequirement>,
    pub drift: BTreeSet<DriftFlag>,
    pub templates: Vec<String>,
    /// Templates whose query was adapted by the previous turn's decision.
    pub adapted_templates: Vec<String>,
    /// Number of knowledge-base retrievals performed.
    pub retrievals: usize,
    pub adaptation: Option<AdaptationRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub session_id: String,
    /// One-based index of the user turn.
    pub turn: usize,
    pub clock: u64,
    pub status: SessionStatus,
    pub state: String,
    pub user_utterance_id: String,
    pub system_utterances: Vec<Utterance>,
    pub fired_transition: Option<Transition>,
    pub decisions: TurnDecisions,
}

/// Source texts for every fixture an engine needs.
#[derive(Debug, Clone, Copy)]
pub struct FixtureSources<'a> {
    pub kb: &'a str,
    pub hierarchy: &'a str,
    pub queries: &'a str,
    pub lexicon: &'a str,
    pub milestone_rules: &'a str,
    pub responses: &'a str,
    pub machine: &'a str,
}

impl FixtureSources<'static> {
    /// The fixtures compiled into the crate.
    pub fn shipped() -> Self {
        Self {
            kb: fixtures::KB,
            hierarchy: fixtures::HIERARCHY,
            queries: fixtures::QUERIES,
            lexicon: fixtures::LEXICON,
            milestone_rules: fixtures::MILESTONE_RULES,
            responses: fixtures::RESPONSES,
            machine: fixtures::MACHINE,
        }
    }
}

/// Immutable resources shared by every session.
#[derive(Clone)]
pub struct Engine {
    pub kg: KnowledgeGraph,
    pub hierarchy: IntentHierarchy,
    pub queries: QueryTemplates,
    pub responses: ResponseLibrary,
    pub machine: Machine,
    pub nlu: Arc<dyn NluProvider>,
    /// Number of entity types the extractor knows, for readiness coverage.
    pub taxonomy_size: usize,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("kg_nodes", &self.kg.node_count())
            .field("nlu", &self.nlu.name())
            .field("initial_state", &self.machine.initial_state)
            .finish()
    }
}

fn load<T, E: fmt::Display>(file: &str, r: Result<T, E>) -> Result<T, EngineError> {
    r.map_err(|e| EngineError::FixtureLoad { file: file.to_string(), message: e.to_string() })
}

impl Engine {
    /// Loads every fixture and cross-checks them, naming the failing file.
    pub fn load(src: &FixtureSources<'_>) -> Result<Self, EngineError> {
        let hierarchy = load("hierarchy", IntentHierarchy::parse(src.hierarchy))?;
        let kg = load("kb", KnowledgeGraph::parse(src.kb))?;
        let queries = load("queries", QueryTemplates::parse(src.queries))?;
        let lexicon = load("lexicon", Lexicon::parse(src.lexicon, &hierarchy).and_then(|l| l.with_kb_terms(&kg)))?;
        let milestone_rules = load("milestones", MilestoneRules::parse(src.milestone_rules))?;
        let responses = load("responses", ResponseLibrary::parse(src.responses, &queries))?;
        let machine = load("machine", Machine::parse(src.machine, &hierarchy))?;
        let taxonomy_size = lexicon.entity_types.len();
        Ok(Self {
            kg,
            hierarchy,
            queries,
            responses,
            machine,
            nlu: Arc::new(RuleProvider { lexicon, milestone_rules }),
            taxonomy_size,
        })
    }

    pub fn shipped() -> Result<Self, EngineError> {
        Self::load(&FixtureSources::shipped())
    }

    /// A fresh active session in the initial state, seeded with the external
    /// milestones implied by the profile's registration answers.
    pub fn create_session(
        &self,
        id: &str,
        profile: UserProfile,
        config: SessionConfig,
    ) -> Result<Session, EngineError> {
        config.validate()?;
        let mut externals =
            ExternalRegistry { known: self.machine.external_catalog.keys().cloned().collect(), ..Default::default() };
        if !profile.registration_facts.is_empty() {
            ensure_capability(self.nlu.as_ref(), Capability::Milestone)?;
            for m in self.nlu.registration_milestones(&profile.registration_facts)? {
                m.validate()?;
                externals.insert(m);
            }
        }
        let mut s = Session {
            id: id.to_string(),
            profile,
            config,
            status: SessionStatus::Active,
            history: ConversationHistory::new(),
            goals: self.machine.goals.clone(),
            milestones: self.machine.milestones.clone(),
            externals,
            entities: Vec::new(),
            state: DialogueState { id: self.machine.initial_state.clone(), ..Default::default() },
            clock: 0,
            unchanged_turns: 0,
            mask: BTreeSet::new(),
            carry: None,
        };
        self.refresh_state(&mut s);
        Ok(s)
    }

    /// A new session driven through the given user texts.
    pub fn replay(
        &self,
        id: &str,
        profile: UserProfile,
        config: SessionConfig,
        texts: &[String],
    ) -> Result<(Session, Vec<TurnOutcome>), EngineError> {
        let mut s = self.create_session(id, profile, config)?;
        let mut outcomes = Vec::with_capacity(texts.len());
        for t in texts {
            outcomes.push(self.step(&mut s, t)?);
        }
        Ok((s, outcomes))
    }

    pub fn state_def(&self, id: &str) -> Result<&StateDef, EngineError> {
        self.machine.states.get(id).ok_or_else(|| EngineError::Invalid(format!("unknown state {id}")))
    }

    /// Runs one user turn.
    ///
    /// A failure inside the turn leaves the session untouched and returns an
    /// outcome carrying a single apology, so the turn can be retried.
    pub fn step(&self, session: &mut Session, text: &str) -> Result<TurnOutcome, EngineError> {
        if session.status != SessionStatus::Active {
            return Err(EngineError::SessionNotActive(session.status));
        }
        if text.trim().is_empty() {
            return Err(EngineError::EmptyUtterance);
        }
        let mut work = session.clone();
        match self.run_turn(&mut work, text) {
            Ok(outcome) => {
                *session = work;
                Ok(outcome)
            }
            Err(e) => Ok(self.apology(session, e)),
        }
    }

    fn apology(&self, s: &Session, e: EngineError) -> TurnOutcome {
        let turn = s.user_turns() + 1;
        let text = self.responses.render_message(&self.responses.messages.apology, &s.entity_context());
        let text = text.unwrap_or_else(|_| self.responses.messages.apology.clone());
        TurnOutcome {
            session_id: s.id.clone(),
            turn,
            clock: s.clock,
            status: s.status,
            state: s.state.id.clone(),
            user_utterance_id: format!("u{turn}"),
            system_utterances: vec![Utterance::system(
                format!("r{}", s.clock + 2),
                s.clock + 2,
                text,
                UtteranceAct::Apology,
            )],
            fired_transition: None,
            decisions: TurnDecisions { error: Some(e.to_string()), ..Default::default() },
        }
    }

    fn run_turn(&self, s: &mut Session, text: &str) -> Result<TurnOutcome, EngineError> {
        let turn = s.user_turns() + 1;
        s.clock += 1;
        let u = Utterance::user(format!("u{turn}"), s.clock, s.profile.user_id.clone(), text);
        s.history.append_utterance(u.clone())?;
        let mut out = Vec::new();
        let mut d = TurnDecisions::default();
        let finish = |s: &Session, out: Vec<Utterance>, fired: Option<Transition>, d: TurnDecisions| TurnOutcome {
            session_id: s.id.clone(),
            turn,
            clock: s.clock,
            status: s.status,
            state: s.state.id.clone(),
            user_utterance_id: u.id.clone(),
            system_utterances: out,
            fired_transition: fired,
            decisions: d,
        };

        // External milestones mentioned or settled by this utterance.
        ensure_capability(self.nlu.as_ref(), Capability::Milestone)?;
        let update = self.nlu.extract_milestones(&u, &s.history, &s.externals)?;
        for m in update.new {
            m.validate()?;
            let id = m.id.clone();
            if s.externals.insert(m) {
                d.milestones_added.push(id);
            }
        }
        for id in update.resolved {
            if s.externals.resolve(&id, &u.id) {
                d.milestones_resolved.push(id);
            }
        }

        // Ask once about each open external milestone.
        let open: Vec<String> =
            s.externals.milestones.values().filter(|m| !m.resolved && !m.clarified).map(|m| m.id.clone()).collect();
        for id in open {
            let m = s.externals.milestones.get_mut(&id).expect("listed above");
            m.clarified = true;
            let m = m.clone();
            let question = get_clarification(&self.responses, &[(ClarificationItem::External(m.clone()), 1.0)])?;
            s.history.append_ext_milestone(s.clock, m)?;
            s.emit(&mut out, question, UtteranceAct::ExternalClarification)?;
            d.external_clarifications.push(id);
        }

        // Intent and entities.
        ensure_capability(self.nlu.as_ref(), Capability::Intent)?;
        let mask = s.mask.clone();
        let intent = self.nlu.recognize_intent(&IntentRequest {
            utterance: &u,
            hierarchy: &self.hierarchy,
            history: &s.history,
            config: &s.config,
            mask: &mask,
        })?;
        s.history.append_intent(intent.clone())?;
        d.intent = Some(intent.clone());

        ensure_capability(self.nlu.as_ref(), Capability::Entity)?;
        let set = self.nlu.extract_entities(&u, &s.history)?;
        s.history.append_entities(set.clone())?;
        let known: BTreeSet<EntityKey> = s.entities.iter().map(Entity::key).collect();
        let mut new_entities = Vec::new();
        for e in &set.entities {
            d.entities.push(entity_ref(e));
            if known.contains(&e.key()) || new_entities.iter().any(|n: &Entity| n.key() == e.key()) {
                continue;
            }
            d.new_entities.push(entity_ref(e));
            new_entities.push(e.clone());
        }
        s.entities.extend(new_entities.iter().cloned());
        let turn_types: BTreeSet<String> = set.entities.iter().map(|e| e.entity_type.clone()).collect();

        // State update.
        let goal = intent_goal(&self.machine, &self.hierarchy, intent.domain.as_deref()).map(String::from);
        self.update_milestones(s, goal.as_deref(), &turn_types)?;
        let fired = self.update_state(s, &intent).cloned();
        if fired.is_some() {
            s.unchanged_turns = 0;
        } else {
            s.unchanged_turns += 1;
        }
        self.refresh_state(s);

        if self.machine.closing.contains(&intent.conversational) {
            let farewell = self.responses.render_message(&self.responses.messages.farewell, &s.entity_context())?;
            s.emit(&mut out, farewell, UtteranceAct::Farewell)?;
            s.status = SessionStatus::Terminated;
            return Ok(finish(s, out, fired, d));
        }

        let vocabulary = self.machine.vocabulary();
        let pinned = self.pinned_values(s, &new_entities);
        d.drift = detect_drift(
            &DriftInput {
                new_entities: &new_entities,
                turn_entities: set.entities.len(),
                vocabulary: &vocabulary,
                pinned: &pinned,
                unchanged_turns: s.unchanged_turns,
            },
            &s.config,
        );
        if let Some(flag) = d.drift.iter().next() {
            let msg = match flag {
                DriftFlag::TopicDrift => &self.responses.messages.topic_drift,
                DriftFlag::Stagnation => &self.responses.messages.stagnation,
            };
            let text = self.responses.render_message(msg, &s.entity_context())?;
            s.emit(&mut out, text, UtteranceAct::Referral)?;
            s.status = SessionStatus::Referred;
            return Ok(finish(s, out, fired, d));
        }

        // Gate on missing prerequisites: one question, no retrieval.
        let state = self.state_def(&s.state.id)?;
        let missing = find_missing_information(state, &s.milestones, s.entities.iter());
        if !missing.is_empty() {
            let items: Vec<(ClarificationItem, f64)> = missing
                .iter()
                .map(|m| (ClarificationItem::Requirement(m.requirement.clone()), s.milestones[&m.milestone].priority))
                .collect();
            let question = get_clarification(&self.responses, &items)?;
            s.emit(&mut out, question, UtteranceAct::Clarification)?;
            d.missing = missing;
            return Ok(finish(s, out, fired, d));
        }

        // Retrieve and answer.
        let graphs = match construct_query_graph(&intent, &s.entities, &self.queries, &self.hierarchy) {
            Ok(graphs) => graphs,
            Err(KbError::NoTemplate { .. }) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let graphs: Vec<QueryGraph> = graphs.into_iter().map(|g| self.apply_carry(s, g, &mut d)).collect();
        if graphs.is_empty() {
            let text = self.responses.render_message(&self.responses.messages.no_template, &s.entity_context())?;
            s.emit(&mut out, text, UtteranceAct::Clarification)?;
        } else {
            let mut factsets = Vec::with_capacity(graphs.len());
            for g in &graphs {
                d.templates.push(g.template_id.clone());
                d.retrievals += 1;
                factsets.push(retrieve_facts(g, &self.kg)?);
            }
            self.derive_entities(s, &u, &graphs, &factsets, &mut d)?;
            let follow_up = s.milestones.values().any(|m| !m.is_complete());
            let chunks = compose_turn(
                &self.responses,
                &factsets,
                s.profile.readability(),
                s.config.max_response_chunks,
                follow_up,
            )?;
            for c in chunks {
                s.emit(&mut out, c, UtteranceAct::Response)?;
            }
        }

        // Priorities, intent mask and the next turn's query adaptation.
        self.update_milestones(s, goal.as_deref(), &turn_types)?;
        let gates: Vec<_> = state
            .gates
            .iter()
            .filter_map(|m| s.milestones.get(m))
            .flat_map(|m| m.prerequisites.iter())
            .cloned()
            .collect();
        let gate_refs: Vec<_> = gates.iter().collect();
        let user_clocks: Vec<u64> =
            s.history.utterances.iter().filter(|x| x.speaker == Speaker::User).map(|x| x.timestamp).collect();
        let idle = |since: u64| user_clocks.iter().filter(|&&c| c > since).count() as u64;
        update_entity_priorities(s.entities.iter_mut(), &gate_refs, u.timestamp, idle);
        s.mask = intent_mask(&self.machine, &s.milestones);
        self.refresh_state(s);

        s.carry = None;
        if !graphs.is_empty() {
            let readiness = estimate_readiness(&s.profile, &s.entity_types(), self.taxonomy_size, &s.milestones);
            let chosen = choose_adaptation(readiness, s.config.tau);
            let usable: BTreeSet<String> =
                graphs.iter().filter(|g| adapt_query(g, chosen).is_ok()).map(|g| g.template_id.clone()).collect();
            let effective = if usable.is_empty() { AdaptDecision::NoChange } else { chosen };
            if !usable.is_empty() && chosen != AdaptDecision::NoChange {
                s.carry = Some(AdaptationCarry { decision: chosen, template_ids: usable });
            }
            d.adaptation = Some(AdaptationRecord { readiness, chosen, effective });
        }

        // Termination once every goal is achieved.
        let mut all = true;
        for g in s.goals.values_mut() {
            g.achieved = goal_achieved(g, &s.milestones, &s.externals)?;
            all &= g.achieved;
        }
        if all {
            let farewell = self.responses.render_message(&self.responses.messages.farewell, &s.entity_context())?;
            s.emit(&mut out, farewell, UtteranceAct::Farewell)?;
            s.status = SessionStatus::Terminated;
        }
        Ok(finish(s, out, fired, d))
    }

    fn update_milestones(
        &self,
        s: &mut Session,
        goal: Option<&str>,
        turn_types: &BTreeSet<String>,
    ) -> Result<(), EngineError> {
        for m in s.milestones.values_mut() {
            m.recompute_progress(s.entities.iter());
        }
        let ctx = PriorityContext { machine: &self.machine, intent_goal: goal, turn_types, externals: &s.externals };
        let mut priorities = BTreeMap::new();
        for (id, m) in &s.milestones {
            priorities.insert(id.clone(), prioritize_milestone(m, &ctx, &s.config.weights)?);
        }
        for (id, p) in priorities {
            s.milestones.get_mut(&id).expect("same keys").priority = p;
        }
        Ok(())
    }

    fn update_state(&self, s: &mut Session, intent: &IntentResult) -> Option<&Transition> {
        let prior = &s.history.intents[..s.history.intents.len().saturating_sub(1)];
        let entity_types = s.entity_types();
        let completed: BTreeSet<String> =
            s.milestones.values().filter(|m| m.is_complete()).map(|m| m.id.clone()).collect();
        let resolved: BTreeSet<String> =
            s.externals.milestones.values().filter(|m| m.resolved).map(|m| m.id.clone()).collect();
        let ctx = TriggerContext {
            intent,
            prior_intents: prior,
            entity_types: &entity_types,
            completed_milestones: &completed,
            resolved_externals: &resolved,
        };
        let priorities: BTreeMap<String, f64> = s.milestones.iter().map(|(k, m)| (k.clone(), m.priority)).collect();
        let fired = select_transition(&self.machine, &s.state.id, &ctx, &priorities)?;
        s.state.id = fired.to_state.clone();
        Some(fired)
    }

    /// Rebuilds the `(context, progress, external)` snapshot of the current state.
    fn refresh_state(&self, s: &mut Session) {
        let goal = self.machine.states.get(&s.state.id).and_then(|d| d.goal.clone());
        s.state.context = StateContext { entity_refs: s.entities.iter().map(entity_ref).collect(), goal_id: goal };
        s.state.progress = s.milestones.iter().map(|(k, m)| (k.clone(), m.progress)).collect();
        s.state.external_snapshot = s.externals.milestones.iter().map(|(k, m)| (k.clone(), m.resolved)).collect();
    }

    /// Values fixed by satisfied pinned prerequisites, from entities known before this turn.
    fn pinned_values(&self, s: &Session, new_entities: &[Entity]) -> BTreeMap<String, EntityValue> {
        let mut out = BTreeMap::new();
        let earlier: Vec<&Entity> = s.entities.iter().filter(|e| !new_entities.contains(e)).collect();
        for m in s.milestones.values() {
            for p in m.prerequisites.iter().filter(|p| p.pinned) {
                if let Some(e) = earlier.iter().find(|e| p.satisfied_by(e)) {
                    out.entry(p.entity_type.clone()).or_insert_with(|| e.value.clone());
                }
            }
        }
        out
    }

    fn apply_carry(&self, s: &Session, g: QueryGraph, d: &mut TurnDecisions) -> QueryGraph {
        match &s.carry {
            Some(c) if c.template_ids.contains(&g.template_id) => match adapt_query(&g, c.decision) {
                Ok(adapted) => {
                    d.adapted_templates.push(g.template_id.clone());
                    adapted
                }
                Err(_) => g,
            },
            _ => g,
        }
    }

    /// Records entities learned from the retrieved facts as a knowledge-origin H_E entry.
    fn derive_entities(
        &self,
        s: &mut Session,
        u: &Utterance,
        graphs: &[QueryGraph],
        factsets: &[FactSet],
        d: &mut TurnDecisions,
    ) -> Result<(), EngineError> {
        let mut derived: Vec<Entity> = Vec::new();
        for (g, f) in graphs.iter().zip(factsets) {
            for spec in &g.derive {
                for row in &f.rows {
                    let Some(value) = row.values.get(&spec.from.to_string()) else { continue };
                    let ty = match (&spec.entity, &spec.entity_from) {
                        (Some(t), _) => t.clone(),
                        (None, Some(p)) => match row.values.get(&p.to_string()) {
                            Some(Scalar::Str(t)) => t.clone(),
                            _ => continue,
                        },
                        (None, None) => continue,
                    };
                    let raw = value.to_string();
                    let e = Entity::new(ty, &raw, raw.clone(), u.id.clone(), u.timestamp);
                    let key = e.key();
                    if s.entities.iter().any(|x| x.key() == key) || derived.iter().any(|x| x.key() == key) {
                        continue;
                    }
                    d.derived_entities.push(entity_ref(&e));
                    derived.push(e);
                }
            }
        }
        if !derived.is_empty() {
            s.history.append_entities(EntitySet {
                utterance_id: u.id.clone(),
                timestamp: u.timestamp,
                origin: EntityOrigin::Knowledge,
                entities: derived.clone(),
            })?;
            s.entities.extend(derived);
        }
        Ok(())
    }
}
