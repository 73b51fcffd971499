use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use mission_core::engine::*;
use mission_core::fixtures;
use mission_core::kb::KnowledgeGraph;
use mission_core::model::*;
use mission_core::nlu::{recognize_intent, Lexicon};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod support {
    pub mod scripts;
}

use support::scripts::{random_script, BAKERY_IDEATION};

fn engine() -> &'static Engine {
    static E: OnceLock<Engine> = OnceLock::new();
    E.get_or_init(|| Engine::shipped().unwrap())
}

fn profile() -> UserProfile {
    UserProfile {
        user_id: "owner".into(),
        education_level: EducationLevel::Intermediate,
        language_proficiency: LanguageProficiency::High,
        registration_facts: Default::default(),
    }
}

#[test]
fn missing_information_stops_retrieval_on_random_scripts() {
    let mut gated_turns = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let script = random_script(&mut rng);
        let mut s = engine().create_session(&format!("seed-{seed}"), profile(), SessionConfig::default()).unwrap();
        for text in &script.turns {
            let out = engine().step(&mut s, text).unwrap();
            if out.decisions.missing.is_empty() {
                continue;
            }
            gated_turns += 1;
            assert_eq!(out.decisions.retrievals, 0, "seed {seed}: retrieval despite missing information on {text:?}");
            let asks = out.system_utterances.iter().filter(|u| u.act == UtteranceAct::Clarification).count();
            assert_eq!(asks, 1, "seed {seed}: expected one clarification on {text:?}");
            assert!(out.system_utterances.iter().all(|u| u.act != UtteranceAct::Response));
        }
    }
    assert!(gated_turns >= 50, "only {gated_turns} gated turns across the scripts");
}

fn weights(a: f64, b: f64) -> PriorityWeights {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    PriorityWeights { progress: lo, relevance: hi - lo, external: 1.0 - hi }
}

fn expected_priority(
    m: &Milestone,
    machine: &Machine,
    w: &PriorityWeights,
    intent_goal: Option<&str>,
    turn: &BTreeSet<String>,
    resolved: &BTreeSet<String>,
) -> f64 {
    let goal = machine.goals.values().find(|g| g.subgoal_ids.contains(&m.id));
    let types: BTreeSet<&String> = m.prerequisites.iter().map(|r| &r.entity_type).collect();
    let relevance = match goal {
        Some(g) if Some(g.id.as_str()) == intent_goal => 1.0,
        _ if types.is_empty() => 0.0,
        _ => types.iter().filter(|t| turn.contains(**t)).count() as f64 / types.len() as f64,
    };
    let external = match goal {
        Some(g) if !g.external_dep_ids.is_empty() => {
            g.external_dep_ids.iter().filter(|e| resolved.contains(*e)).count() as f64 / g.external_dep_ids.len() as f64
        }
        _ => 1.0,
    };
    w.progress * (1.0 - m.progress) + w.relevance * relevance + w.external * external
}

const TYPES: [&str; 9] = [
    "BusinessType",
    "Location",
    "Demographics",
    "SpendingPattern",
    "ProductType",
    "RentalCost",
    "Pricing",
    "Permit",
    "License",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn milestone_priority_matches_weighted_sum(
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
        progress in prop::collection::vec(prop::sample::select(vec![0.0, 0.5, 1.0]), 5),
        turn_mask in prop::collection::vec(any::<bool>(), TYPES.len()),
        goal_pick in 0usize..5,
        readiness in any::<bool>(),
    ) {
        let machine = &engine().machine;
        let w = weights(a, b);
        let turn: BTreeSet<String> = TYPES.iter().zip(&turn_mask).filter(|(_, on)| **on).map(|(t, _)| t.to_string()).collect();
        let goal_ids: Vec<&str> = machine.goals.keys().map(String::as_str).collect();
        let intent_goal = goal_ids.get(goal_pick).copied();
        let mut externals = ExternalRegistry::default();
        let ready = ExternalMilestone::new(ExternalKind::UserState, "financial readiness", readiness, readiness.then(|| "u1".to_string()));
        let ready_id = ready.id.clone();
        externals.insert(ready);
        let resolved: BTreeSet<String> = if readiness { [ready_id].into() } else { BTreeSet::new() };
        let ctx = PriorityContext { machine, intent_goal, turn_types: &turn, externals: &externals };
        for (m, p) in machine.milestones.values().zip(&progress) {
            let mut m = m.clone();
            m.progress = *p;
            let got = prioritize_milestone(&m, &ctx, &w).unwrap();
            let want = expected_priority(&m, machine, &w, intent_goal, &turn, &resolved);
            prop_assert!((got - want).abs() <= 1e-9, "{}: {got} vs {want}", m.id);
            prop_assert!((0.0..=1.0).contains(&got));
        }
    }

    #[test]
    fn equal_components_give_that_value(a in 0.0f64..=1.0, b in 0.0f64..=1.0, x in 0.0f64..=1.0) {
        let c = PriorityComponents { progress: x, relevance: x, external: x };
        prop_assert_eq!(combine_priority(&weights(a, b), &c).unwrap(), x);
    }

    #[test]
    fn priority_is_monotone_in_each_component(
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
        c in prop::array::uniform3(0.0f64..=1.0),
        which in 0usize..3,
        bump in 0.0f64..=1.0,
    ) {
        let w = weights(a, b);
        let base = PriorityComponents { progress: c[0], relevance: c[1], external: c[2] };
        let mut up = base;
        match which {
            0 => up.progress = (up.progress + bump).min(1.0),
            1 => up.relevance = (up.relevance + bump).min(1.0),
            _ => up.external = (up.external + bump).min(1.0),
        }
        prop_assert!(combine_priority(&w, &up).unwrap() + 1e-12 >= combine_priority(&w, &base).unwrap());
    }

    #[test]
    fn entity_priority_follows_reference_history(refs in prop::collection::vec(any::<bool>(), 100)) {
        let requirement = EntityRequirement::of_type("Permit", "permits");
        let other = EntityRequirement::of_type("License", "licenses");
        let mut entities = [Entity::new("Permit", "health permit", "health permit", "u1", 1)];
        let mut oracle = entities[0].priority;
        let mut last = 1u64;
        for (i, referenced) in refs.iter().enumerate() {
            let now = i as u64 + 2;
            let req = if *referenced { &requirement } else { &other };
            update_entity_priorities(entities.iter_mut(), &[req], now, |since| now - since);
            let idle = now - last;
            if *referenced {
                oracle = (oracle + 0.2).min(1.0);
                last = now;
            } else if idle >= 3 && oracle > 0.1 {
                oracle = (oracle - 0.1).max(0.1);
            }
            prop_assert!((entities[0].priority - oracle).abs() <= 1e-9, "turn {now}: {} vs {oracle}", entities[0].priority);
            prop_assert!((0.0..=1.0).contains(&entities[0].priority));
        }
    }
}

const CONFLICT: &str = r#"
version = 1
initial_state = "a"

[[goal]]
id = "g"
description = "goal"
milestones = ["mb", "mc"]

[[milestone]]
id = "mb"
description = "b"
requires = [{ type = "Permit", label = "permits" }]

[[milestone]]
id = "mc"
description = "c"
requires = [{ type = "License", label = "licenses" }]

[[state]]
id = "a"
description = "a"

[[state]]
id = "b"
description = "b"
gates = ["mb"]

[[state]]
id = "c"
description = "c"
gates = ["mc"]

[[transition]]
id = "tb"
from = "a"
to = "b"
action = "query"
trigger = { domain_under = ["1"] }

[[transition]]
id = "tc"
from = "a"
to = "c"
action = "query"
trigger = { domain_under = ["1"] }

[node_goals]
"1" = "g"
"#;

fn conflict_machine() -> Machine {
    let h = IntentHierarchy::parse("1. Permits\n 1.1. Health permit\n3. Finance\n").unwrap();
    Machine::parse(CONFLICT, &h).unwrap()
}

fn permit_intent() -> IntentResult {
    IntentResult {
        conversational: "factual-question".into(),
        domain: Some("1.1".into()),
        score: 1.0,
        conversational_score: 1.0,
        domain_score: 1.0,
        timestamp: 1,
        utterance_id: "u1".into(),
    }
}

proptest! {
    #[test]
    fn transition_choice_ignores_priority_scale(pb in 0.0f64..=1.0, pc in 0.0f64..=1.0) {
        let machine = conflict_machine();
        let intent = permit_intent();
        let empty = BTreeSet::new();
        let ctx = TriggerContext {
            intent: &intent,
            prior_intents: &[],
            entity_types: &empty,
            completed_milestones: &empty,
            resolved_externals: &empty,
        };
        let want = if pb >= pc { "tb" } else { "tc" };
        for c in [1.0, 0.1, 3.0, 100.0] {
            let priorities = BTreeMap::from([("mb".to_string(), pb * c), ("mc".to_string(), pc * c)]);
            let got = select_transition(&machine, "a", &ctx, &priorities).map(|t| t.id.as_str());
            prop_assert_eq!(got, Some(want), "scale {}", c);
        }
    }
}

#[test]
fn intent_choice_ignores_lexicon_scale() {
    let h = IntentHierarchy::parse(fixtures::HIERARCHY).unwrap();
    let kg = KnowledgeGraph::parse(fixtures::KB).unwrap();
    let lex = Lexicon::parse(fixtures::LEXICON, &h).unwrap().with_kb_terms(&kg).unwrap();
    let mut texts: Vec<String> = BAKERY_IDEATION.iter().map(|t| t.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        texts.extend(random_script(&mut rng).turns);
    }
    let config = SessionConfig::default();
    for c in [0.1, 3.0, 100.0] {
        let scaled = lex.scaled(c);
        let mut hist = ConversationHistory::new();
        for (i, text) in texts.iter().enumerate() {
            let clock = 2 * i as u64 + 1;
            let u = Utterance::user(format!("u{clock}"), clock, "owner", text);
            hist.append_utterance(u.clone()).unwrap();
            let a = recognize_intent(&lex, &u, &h, &hist, &config, &BTreeSet::new()).unwrap();
            let b = recognize_intent(&scaled, &u, &h, &hist, &config, &BTreeSet::new()).unwrap();
            assert_eq!((a.conversational, a.domain), (b.conversational, b.domain), "scale {c} on {text:?}");
            hist.append_utterance(Utterance::system(
                format!("r{}", clock + 1),
                clock + 1,
                "Noted.",
                UtteranceAct::Response,
            ))
            .unwrap();
        }
    }
}
