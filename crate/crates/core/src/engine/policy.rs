//! Pure decision rules used by each turn: milestone and entity priorities,
//! intent masking, missing-information gating, transition choice and drift.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::machine::{Machine, StateDef};
use crate::model::{
    Entity, EntityRequirement, EntityValue, ExternalRegistry, IntentHierarchy, Milestone, ModelError, PriorityWeights,
    SessionConfig, Transition, TriggerContext,
};

/// Priority bonus for an entity a gating milestone relies on.
pub const ENTITY_REFERENCE_BONUS: f64 = 0.2;
/// Priority lost per turn by an entity left idle for too long.
pub const ENTITY_DECAY: f64 = 0.1;
pub const ENTITY_PRIORITY_FLOOR: f64 = 0.1;
/// Idle user turns after which an entity starts to decay.
pub const ENTITY_IDLE_TURNS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityComponents {
    /// Urgency, `1 - progress`.
    pub progress: f64,
    pub relevance: f64,
    pub external: f64,
}

/// Weighted sum of the components, clamped to `[0, 1]`.
///
/// Written as offsets from the external component so that equal components
/// return that value exactly, with no rounding from the three products.
pub fn combine_priority(weights: &PriorityWeights, c: &PriorityComponents) -> Result<f64, ModelError> {
    weights.validate()?;
    let p = c.external + weights.progress * (c.progress - c.external) + weights.relevance * (c.relevance - c.external);
    Ok(p.clamp(0.0, 1.0))
}

/// What a milestone's priority depends on besides the milestone itself.
#[derive(Debug, Clone, Copy)]
pub struct PriorityContext<'a> {
    pub machine: &'a Machine,
    /// Goal served by this turn's domain intent.
    pub intent_goal: Option<&'a str>,
    /// Entity types mentioned this turn.
    pub turn_types: &'a BTreeSet<String>,
    pub externals: &'a ExternalRegistry,
}

pub fn priority_components(m: &Milestone, ctx: &PriorityContext<'_>) -> PriorityComponents {
    let goal = ctx.machine.goal_of_milestone(&m.id);
    let relevance = if goal.is_some_and(|g| Some(g.id.as_str()) == ctx.intent_goal) {
        1.0
    } else {
        let types: BTreeSet<&str> = m.prerequisites.iter().map(|p| p.entity_type.as_str()).collect();
        if types.is_empty() {
            0.0
        } else {
            types.iter().filter(|t| ctx.turn_types.contains(**t)).count() as f64 / types.len() as f64
        }
    };
    let external = match goal {
        Some(g) if !g.external_dep_ids.is_empty() => {
            let resolved = g.external_dep_ids.iter().filter(|id| ctx.externals.is_resolved(id)).count();
            resolved as f64 / g.external_dep_ids.len() as f64
        }
        _ => 1.0,
    };
    PriorityComponents { progress: (1.0 - m.progress).clamp(0.0, 1.0), relevance, external }
}

pub fn prioritize_milestone(
    m: &Milestone,
    ctx: &PriorityContext<'_>,
    weights: &PriorityWeights,
) -> Result<f64, ModelError> {
    combine_priority(weights, &priority_components(m, ctx))
}

/// Next priority of an entity. Referenced entities gain the bonus; entities
/// idle for [`ENTITY_IDLE_TURNS`] or more lose [`ENTITY_DECAY`] down to the floor.
pub fn next_entity_priority(old: f64, referenced: bool, idle_turns: u64) -> f64 {
    let p = if referenced {
        old + ENTITY_REFERENCE_BONUS
    } else if idle_turns >= ENTITY_IDLE_TURNS && old > ENTITY_PRIORITY_FLOOR {
        (old - ENTITY_DECAY).max(ENTITY_PRIORITY_FLOOR)
    } else {
        old
    };
    p.clamp(0.0, 1.0)
}

/// Applies [`next_entity_priority`] to every accumulated entity.
///
/// `idle_turns` maps an entity's `last_referenced` clock to the number of user
/// turns since. Referenced entities have `last_referenced` set to `now`.
pub fn update_entity_priorities<'a>(
    entities: impl Iterator<Item = &'a mut Entity>,
    requirements: &[&EntityRequirement],
    now: u64,
    idle_turns: impl Fn(u64) -> u64,
) {
    for e in entities {
        let referenced = requirements.iter().any(|r| r.satisfied_by(e));
        e.priority = next_entity_priority(e.priority, referenced, idle_turns(e.last_referenced));
        if referenced {
            e.last_referenced = now;
        }
    }
}

/// Hierarchy subtrees removed from intent recognition: those of completed milestones.
pub fn intent_mask(machine: &Machine, milestones: &BTreeMap<String, Milestone>) -> BTreeSet<String> {
    machine
        .masks
        .iter()
        .filter(|(m, _)| milestones.get(*m).is_some_and(Milestone::is_complete))
        .map(|(_, node)| node.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingRequirement {
    pub milestone: String,
    pub requirement: EntityRequirement,
}

/// Prerequisites of the state's gating milestones that no accumulated entity satisfies.
pub fn find_missing_information<'a>(
    state: &StateDef,
    milestones: &BTreeMap<String, Milestone>,
    entities: impl Iterator<Item = &'a Entity> + Clone,
) -> Vec<MissingRequirement> {
    let mut out: Vec<MissingRequirement> = Vec::new();
    for id in &state.gates {
        let Some(m) = milestones.get(id) else { continue };
        for r in &m.prerequisites {
            if !r.satisfied_in(entities.clone()) && !out.iter().any(|x| x.requirement == *r) {
                out.push(MissingRequirement { milestone: id.clone(), requirement: r.clone() });
            }
        }
    }
    out
}

/// Highest gating-milestone priority of a state, zero without gates.
pub fn state_priority(state: &StateDef, priorities: &BTreeMap<String, f64>) -> f64 {
    state.gates.iter().filter_map(|m| priorities.get(m)).copied().fold(0.0, f64::max)
}

/// The transition that fires from `current`: the only one whose trigger holds,
/// or among several the one entering the state with the highest-priority
/// gating milestone, ties going to the smaller state id and then transition id.
pub fn select_transition<'a>(
    machine: &'a Machine,
    current: &str,
    ctx: &TriggerContext<'_>,
    priorities: &BTreeMap<String, f64>,
) -> Option<&'a Transition> {
    let score = |t: &Transition| machine.states.get(&t.to_state).map(|s| state_priority(s, priorities)).unwrap_or(0.0);
    machine.transitions.iter().filter(|t| t.from_state == current && t.trigger.holds(ctx)).min_by(|a, b| {
        score(b).total_cmp(&score(a)).then_with(|| a.to_state.cmp(&b.to_state)).then_with(|| a.id.cmp(&b.id))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftFlag {
    TopicDrift,
    Stagnation,
}

/// Everything drift detection looks at for one turn.
#[derive(Debug, Clone, Copy)]
pub struct DriftInput<'a> {
    /// Entities of this turn not seen before.
    pub new_entities: &'a [Entity],
    /// All entities of this turn, new or repeated.
    pub turn_entities: usize,
    /// Entity types that belong to the mission.
    pub vocabulary: &'a BTreeSet<String>,
    /// Values fixed by pinned prerequisites, by entity type.
    pub pinned: &'a BTreeMap<String, EntityValue>,
    /// Consecutive user turns the state has not changed, this one included.
    pub unchanged_turns: u32,
}

fn on_mission(e: &Entity, input: &DriftInput<'_>) -> bool {
    input.vocabulary.contains(&e.entity_type) && input.pinned.get(&e.entity_type).is_none_or(|v| *v == e.value)
}

pub fn detect_drift(input: &DriftInput<'_>, config: &SessionConfig) -> BTreeSet<DriftFlag> {
    let mut flags = BTreeSet::new();
    let ratio = input.new_entities.len() as f64 / input.turn_entities.max(1) as f64;
    if !input.new_entities.is_empty()
        && ratio > config.drift_new_entity_ratio
        && !input.new_entities.iter().any(|e| on_mission(e, input))
    {
        flags.insert(DriftFlag::TopicDrift);
    }
    if input.unchanged_turns >= config.repeat_state_limit {
        flags.insert(DriftFlag::Stagnation);
    }
    flags
}

/// Goal served by the domain of an intent, if any.
pub fn intent_goal<'a>(machine: &'a Machine, hierarchy: &IntentHierarchy, domain: Option<&str>) -> Option<&'a str> {
    domain.and_then(|d| machine.goal_for_node(d, hierarchy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_priority_example() {
        let w = PriorityWeights { progress: 0.5, relevance: 0.3, external: 0.2 };
        let c = PriorityComponents { progress: 0.4, relevance: 1.0, external: 0.5 };
        assert!((combine_priority(&w, &c).unwrap() - 0.60).abs() < 1e-12);
    }

    #[test]
    fn invalid_weights_are_rejected() {
        let w = PriorityWeights { progress: 0.5, relevance: 0.5, external: 0.5 };
        let c = PriorityComponents { progress: 0.0, relevance: 0.0, external: 0.0 };
        assert!(matches!(combine_priority(&w, &c), Err(ModelError::InvalidWeights(_))));
    }

    #[test]
    fn referenced_entity_gains_bonus() {
        assert!((next_entity_priority(0.5, true, 0) - 0.7).abs() < 1e-12);
        assert_eq!(next_entity_priority(0.95, true, 0), 1.0);
    }

    #[test]
    fn idle_entity_decays_to_floor() {
        assert!((next_entity_priority(0.5, false, 3) - 0.4).abs() < 1e-12);
        assert_eq!(next_entity_priority(0.5, false, 2), 0.5);
        assert_eq!(next_entity_priority(0.1, false, 10), 0.1);
        assert_eq!(next_entity_priority(0.15, false, 10), 0.1);
    }

    fn entity(t: &str, v: &str) -> Entity {
        Entity::new(t, v, v, "u1", 1)
    }

    #[test]
    fn no_new_entities_no_flags() {
        let vocab = BTreeSet::new();
        let pinned = BTreeMap::new();
        let input =
            DriftInput { new_entities: &[], turn_entities: 2, vocabulary: &vocab, pinned: &pinned, unchanged_turns: 1 };
        assert!(detect_drift(&input, &SessionConfig::default()).is_empty());
    }

    #[test]
    fn pinned_value_change_is_off_mission() {
        let vocab: BTreeSet<String> = ["BusinessType".to_string()].into();
        let pinned = BTreeMap::from([("BusinessType".to_string(), EntityValue::parse("bakery"))]);
        let new = [entity("BusinessType", "catering")];
        let input = DriftInput {
            new_entities: &new,
            turn_entities: 1,
            vocabulary: &vocab,
            pinned: &pinned,
            unchanged_turns: 0,
        };
        assert_eq!(detect_drift(&input, &SessionConfig::default()), [DriftFlag::TopicDrift].into());
        let same = [entity("BusinessType", "bakery")];
        let input = DriftInput { new_entities: &same, ..input };
        assert!(detect_drift(&input, &SessionConfig::default()).is_empty());
    }

    #[test]
    fn repeated_state_is_stagnation() {
        let vocab = BTreeSet::new();
        let pinned = BTreeMap::new();
        let input =
            DriftInput { new_entities: &[], turn_entities: 0, vocabulary: &vocab, pinned: &pinned, unchanged_turns: 3 };
        assert_eq!(detect_drift(&input, &SessionConfig::default()), [DriftFlag::Stagnation].into());
    }
}
