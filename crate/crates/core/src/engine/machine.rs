//! The declarative mission definition: goals, milestones, states and transitions.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use super::EngineError;
use crate::model::{
    ActionKind, ActionSpec, EntityRequirement, ExternalKind, ExternalMilestone, Goal, IntentHierarchy, Milestone,
    Transition, TriggerCondition,
};
use crate::text::line_of;

pub const MACHINE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StateDef {
    pub id: String,
    pub description: String,
    /// Goal the state pursues.
    pub goal: Option<String>,
    /// Milestones whose prerequisites must be known before the state answers.
    pub gates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    pub initial_state: String,
    /// Conversational categories that end the session.
    pub closing: BTreeSet<String>,
    pub goals: BTreeMap<String, Goal>,
    /// Extra on-mission entity types per goal, beyond milestone prerequisites.
    pub goal_vocabulary: BTreeMap<String, BTreeSet<String>>,
    /// Initial milestone records, progress and priority zero.
    pub milestones: BTreeMap<String, Milestone>,
    /// Hierarchy subtree a milestone removes from intent recognition once complete.
    pub masks: BTreeMap<String, String>,
    /// External milestones goals depend on, unresolved.
    pub external_catalog: BTreeMap<String, ExternalMilestone>,
    pub states: BTreeMap<String, StateDef>,
    pub transitions: Vec<Transition>,
    pub node_goals: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMachine {
    version: u32,
    initial_state: String,
    #[serde(default)]
    closing: BTreeSet<String>,
    #[serde(default, rename = "goal")]
    goals: Vec<toml::Spanned<RawGoal>>,
    #[serde(default, rename = "milestone")]
    milestones: Vec<toml::Spanned<RawMilestone>>,
    #[serde(default, rename = "state")]
    states: Vec<toml::Spanned<RawState>>,
    #[serde(default, rename = "transition")]
    transitions: Vec<toml::Spanned<RawTransition>>,
    #[serde(default)]
    node_goals: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGoal {
    id: String,
    description: String,
    #[serde(default)]
    milestones: BTreeSet<String>,
    #[serde(default)]
    external: Vec<RawExternal>,
    #[serde(default)]
    vocabulary: BTreeSet<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExternal {
    kind: ExternalKind,
    description: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMilestone {
    id: String,
    description: String,
    #[serde(default)]
    masks: Option<String>,
    requires: Vec<RawRequirement>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRequirement {
    #[serde(rename = "type")]
    entity_type: String,
    label: String,
    #[serde(default)]
    value: Option<String>,
    #[serde(default)]
    pinned: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    id: String,
    description: String,
    #[serde(default)]
    goal: Option<String>,
    #[serde(default)]
    gates: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransition {
    id: String,
    from: String,
    to: String,
    action: ActionKind,
    #[serde(default)]
    params: BTreeMap<String, String>,
    #[serde(default)]
    trigger: TriggerCondition,
}

impl Machine {
    /// Parses a machine file and checks every reference against itself and the hierarchy.
    pub fn parse(text: &str, hierarchy: &IntentHierarchy) -> Result<Self, EngineError> {
        let raw: RawMachine = toml::from_str(text).map_err(|e| EngineError::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        if raw.version != MACHINE_VERSION {
            return Err(EngineError::Parse {
                line: 1,
                message: format!("unsupported machine file version {}", raw.version),
            });
        }
        let err = |span: std::ops::Range<usize>, message: String| EngineError::Parse {
            line: line_of(text, span.start),
            message,
        };
        let check_node = |span: std::ops::Range<usize>, node: &str| {
            if hierarchy.contains(node) {
                Ok(())
            } else {
                Err(err(span, format!("unknown intent node {node}")))
            }
        };

        let mut milestones = BTreeMap::new();
        let mut masks = BTreeMap::new();
        for spanned in raw.milestones {
            let span = spanned.span();
            let m = spanned.into_inner();
            if m.requires.is_empty() {
                return Err(err(span, format!("milestone {} has no prerequisites", m.id)));
            }
            if let Some(node) = &m.masks {
                check_node(span.clone(), node)?;
                masks.insert(m.id.clone(), node.clone());
            }
            let prerequisites = m
                .requires
                .into_iter()
                .map(|r| EntityRequirement {
                    entity_type: r.entity_type,
                    label: r.label,
                    value: r.value,
                    pinned: r.pinned,
                })
                .collect();
            let record =
                Milestone { id: m.id.clone(), description: m.description, prerequisites, progress: 0.0, priority: 0.0 };
            if milestones.insert(m.id.clone(), record).is_some() {
                return Err(err(span, format!("duplicate milestone {}", m.id)));
            }
        }

        let mut goals = BTreeMap::new();
        let mut goal_vocabulary = BTreeMap::new();
        let mut external_catalog = BTreeMap::new();
        for spanned in raw.goals {
            let span = spanned.span();
            let g = spanned.into_inner();
            if let Some(m) = g.milestones.iter().find(|m| !milestones.contains_key(*m)) {
                return Err(err(span, format!("goal {} names unknown milestone {m}", g.id)));
            }
            let mut deps = BTreeSet::new();
            for e in &g.external {
                let m = ExternalMilestone::new(e.kind, &e.description, false, None);
                deps.insert(m.id.clone());
                external_catalog.insert(m.id.clone(), m);
            }
            goal_vocabulary.insert(g.id.clone(), g.vocabulary);
            let goal = Goal {
                id: g.id.clone(),
                description: g.description,
                subgoal_ids: g.milestones,
                external_dep_ids: deps,
                achieved: false,
            };
            if goals.insert(g.id.clone(), goal).is_some() {
                return Err(err(span, format!("duplicate goal {}", g.id)));
            }
        }

        let mut states = BTreeMap::new();
        for spanned in raw.states {
            let span = spanned.span();
            let s = spanned.into_inner();
            if let Some(g) = s.goal.as_ref().filter(|g| !goals.contains_key(*g)) {
                return Err(err(span, format!("state {} names unknown goal {g}", s.id)));
            }
            if let Some(m) = s.gates.iter().find(|m| !milestones.contains_key(*m)) {
                return Err(err(span, format!("state {} gates on unknown milestone {m}", s.id)));
            }
            let def = StateDef { id: s.id.clone(), description: s.description, goal: s.goal, gates: s.gates };
            if states.insert(s.id.clone(), def).is_some() {
                return Err(err(span, format!("duplicate state {}", s.id)));
            }
        }
        if !states.contains_key(&raw.initial_state) {
            return Err(EngineError::Parse {
                line: 1,
                message: format!("initial state {} is not defined", raw.initial_state),
            });
        }

        let mut transitions: Vec<Transition> = Vec::new();
        for spanned in raw.transitions {
            let span = spanned.span();
            let t = spanned.into_inner();
            for s in [&t.from, &t.to] {
                if !states.contains_key(s) {
                    return Err(err(span.clone(), format!("transition {} names unknown state {s}", t.id)));
                }
            }
            let trig = &t.trigger;
            for node in trig.domain_under.iter().chain(&trig.prior_domain).chain(&trig.no_prior_domain) {
                check_node(span.clone(), node)?;
            }
            if let Some(m) = trig.milestones_complete.iter().find(|m| !milestones.contains_key(*m)) {
                return Err(err(span, format!("transition {} names unknown milestone {m}", t.id)));
            }
            if let Some(e) = trig.external_resolved.iter().find(|e| !external_catalog.contains_key(*e)) {
                return Err(err(span, format!("transition {} names external milestone {e} no goal depends on", t.id)));
            }
            if transitions.iter().any(|x| x.id == t.id) {
                return Err(err(span, format!("duplicate transition {}", t.id)));
            }
            let transition = Transition {
                id: t.id,
                from_state: t.from,
                to_state: t.to,
                trigger: t.trigger,
                action: ActionSpec { kind: t.action, params: t.params },
            };
            transition.validate().map_err(|e| err(span, e.to_string()))?;
            transitions.push(transition);
        }

        for (node, goal) in &raw.node_goals {
            if !hierarchy.contains(node) {
                return Err(EngineError::Invalid(format!("node_goals names unknown intent node {node}")));
            }
            if !goals.contains_key(goal) {
                return Err(EngineError::Invalid(format!("node_goals names unknown goal {goal}")));
            }
        }

        Ok(Self {
            initial_state: raw.initial_state,
            closing: raw.closing,
            goals,
            goal_vocabulary,
            milestones,
            masks,
            external_catalog,
            states,
            transitions,
            node_goals: raw.node_goals,
        })
    }

    /// Goal served by a domain node: the nearest ancestor with a mapping.
    pub fn goal_for_node(&self, node: &str, hierarchy: &IntentHierarchy) -> Option<&str> {
        hierarchy.ancestors_inclusive(node).find_map(|n| self.node_goals.get(n)).map(String::as_str)
    }

    /// Goal a milestone belongs to; the first by id when several list it.
    pub fn goal_of_milestone(&self, milestone: &str) -> Option<&Goal> {
        self.goals.values().find(|g| g.subgoal_ids.contains(milestone))
    }

    /// Every entity type the mission cares about.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> =
            self.milestones.values().flat_map(|m| m.prerequisites.iter().map(|p| p.entity_type.clone())).collect();
        out.extend(self.goal_vocabulary.values().flatten().cloned());
        out
    }

    /// Transitions leaving a state, in declaration order.
    pub fn outgoing<'a>(&'a self, state: &'a str) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions.iter().filter(move |t| t.from_state == state)
    }
}
