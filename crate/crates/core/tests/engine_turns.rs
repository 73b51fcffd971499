use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use mission_core::engine::*;
use mission_core::model::*;
use mission_core::nlu::{Capability, IntentRequest, NluError, NluProvider};

const BAKERY_IDEATION: [&str; 8] = [
    "I'm interested in starting a bakery in San Ysidro, San Diego County, California. What do I need to know?",
    "Let’s start with the market. What should I know about San Ysidro?",
    "That’s a good point. What adjustments would you recommend?",
    "Yes, I could include traditional Mexican baked goods like pan dulce. I’d also like to know how this impacts my budget.",
    "Let’s refine the budget. I estimate around $120,000 in startup costs, but I’m unsure about permit fees.",
    "Sure, let’s focus on the health permit. My layout includes areas for baking, cooling, and retail space.",
    "Yes, and I’ve secured a loan for $80,000. I’d like to understand how this affects my timeline.",
    "No, I think I have a clear picture now. Thanks for your help!",
];

fn engine() -> &'static Engine {
    static E: OnceLock<Engine> = OnceLock::new();
    E.get_or_init(|| Engine::shipped().unwrap())
}

fn profile(facts: &[&str]) -> UserProfile {
    UserProfile {
        user_id: "owner".into(),
        education_level: EducationLevel::Intermediate,
        language_proficiency: LanguageProficiency::High,
        registration_facts: facts.iter().map(|f| f.to_string()).collect(),
    }
}

fn session() -> Session {
    engine().create_session("s", profile(&[]), SessionConfig::default()).unwrap()
}

fn run(texts: &[&str]) -> (Session, Vec<TurnOutcome>) {
    let mut s = session();
    let outs = texts.iter().map(|t| engine().step(&mut s, t).unwrap()).collect();
    (s, outs)
}

fn text_of(o: &TurnOutcome) -> String {
    o.system_utterances.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" ")
}

#[test]
fn bakery_ideation_trajectory() {
    let (s, outs) = run(&BAKERY_IDEATION);
    let states: Vec<&str> = outs.iter().map(|o| o.state.as_str()).collect();
    assert_eq!(states, ["s1", "s2", "s3", "s4", "s4", "s4", "s5", "s5"]);
    assert!(text_of(&outs[0]).ends_with("Which aspect would you like to explore first?"));
    assert!(text_of(&outs[1]).contains("lower median income"));
    assert!(text_of(&outs[4]).contains("$1,000") && text_of(&outs[4]).contains("$5,000"));
    assert!(text_of(&outs[4]).contains("Shall we prioritize the health permit"));
    assert!(outs[6].decisions.milestones_added.contains(&"ext:user_state:financial-readiness".to_string()));
    assert_eq!(outs[7].status, SessionStatus::Terminated);
    assert_eq!(outs[7].system_utterances[0].act, UtteranceAct::Farewell);
    assert_eq!(s.status, SessionStatus::Terminated);
    assert!(outs.iter().all(|o| o.decisions.drift.is_empty()));
}

#[test]
fn loan_turn_registers_resolved_financial_readiness() {
    let (s, _) = run(&BAKERY_IDEATION[..7]);
    let m = &s.externals.milestones["ext:user_state:financial-readiness"];
    assert!(m.resolved);
    assert_eq!(m.source_utterance_id.as_deref(), Some("u7"));
    assert!(s.entities.iter().any(|e| entity_ref(e) == "Funding=$80,000"));
}

#[test]
fn external_clarification_precedes_the_answer() {
    let (_, outs) = run(&BAKERY_IDEATION[..6]);
    let acts: Vec<UtteranceAct> = outs[5].system_utterances.iter().map(|u| u.act).collect();
    assert_eq!(acts[0], UtteranceAct::ExternalClarification);
    assert!(acts[1..].iter().all(|a| *a == UtteranceAct::Response));
    assert!(outs[5].system_utterances[0].text.contains("health permit"));
}

#[test]
fn unresolved_financial_readiness_keeps_s4() {
    let mut texts = BAKERY_IDEATION[..4].to_vec();
    texts.push("How would a loan cover my funding needs?");
    let (s, outs) = run(&texts);
    assert_eq!(outs[4].decisions.intent.as_ref().unwrap().domain.as_deref(), Some("3.2"));
    assert!(outs[4].fired_transition.is_none());
    assert_eq!(s.state.id, "s4");
}

#[test]
fn missing_license_gets_one_question_and_no_retrieval() {
    let mut texts = BAKERY_IDEATION[..7].to_vec();
    texts.push("What permits do I need to open?");
    let (s, outs) = run(&texts);
    let o = &outs[7];
    assert_eq!(o.state, "s6");
    assert_eq!(o.decisions.retrievals, 0);
    assert_eq!(o.system_utterances.len(), 1);
    assert_eq!(o.system_utterances[0].act, UtteranceAct::Clarification);
    assert!(o.system_utterances[0].text.contains("licenses"));
    let missing: Vec<&str> = o.decisions.missing.iter().map(|m| m.requirement.entity_type.as_str()).collect();
    assert_eq!(missing, ["License"]);
    assert_eq!(s.status, SessionStatus::Active);
}

#[test]
fn missing_location_asks_for_it() {
    let (_, outs) = run(&["I want to open a bakery. Where do I begin?"]);
    assert_eq!(outs[0].decisions.retrievals, 0);
    assert_eq!(outs[0].system_utterances.len(), 1);
    assert!(outs[0].system_utterances[0].text.contains("location"));
}

#[test]
fn catering_pivot_is_topic_drift() {
    let mut texts = BAKERY_IDEATION[..3].to_vec();
    texts.push("Actually, I'm thinking about starting a catering business in Chula Vista instead.");
    let (s, outs) = run(&texts);
    assert_eq!(outs[3].decisions.drift, [DriftFlag::TopicDrift].into());
    assert_eq!(outs[3].system_utterances[0].act, UtteranceAct::Referral);
    assert_eq!(s.status, SessionStatus::Referred);
}

#[test]
fn repeated_question_is_stagnation() {
    let mut texts = BAKERY_IDEATION[..7].to_vec();
    texts.extend(["Tell me again how permits affect my budget?"; 3]);
    let (s, outs) = run(&texts);
    assert!(outs[7].decisions.drift.is_empty() && outs[8].decisions.drift.is_empty());
    assert_eq!(outs[9].decisions.drift, [DriftFlag::Stagnation].into());
    assert_eq!(outs[9].state, "s5");
    assert_eq!(s.status, SessionStatus::Referred);
}

#[test]
fn terminated_session_rejects_turns() {
    let (mut s, _) = run(&BAKERY_IDEATION);
    let err = engine().step(&mut s, "One more thing?").unwrap_err();
    assert_eq!(err, EngineError::SessionNotActive(SessionStatus::Terminated));
}

#[test]
fn registration_answers_seed_external_milestones() {
    let s = engine().create_session("r", profile(&["work authorization: yes"]), SessionConfig::default()).unwrap();
    let m = &s.externals.milestones["ext:user_state:work-authorization"];
    assert!(m.resolved);
    assert_eq!(m.source_utterance_id.as_deref(), Some(REGISTRATION_SOURCE));
    assert_eq!(s.state.id, "s1");
    assert_eq!(s.status, SessionStatus::Active);
}

#[test]
fn unresolved_registration_answer_is_asked_on_the_first_turn() {
    let mut s = engine().create_session("r", profile(&["work authorization: no"]), SessionConfig::default()).unwrap();
    let o = engine().step(&mut s, BAKERY_IDEATION[0]).unwrap();
    assert_eq!(o.system_utterances[0].act, UtteranceAct::ExternalClarification);
    assert!(o.system_utterances[0].text.contains("work authorization"));
    assert_eq!(s.history.ext_milestones.len(), 1);
}

#[test]
fn external_milestones_only_grow() {
    let mut s = session();
    let mut prev: BTreeMap<String, bool> = BTreeMap::new();
    for t in BAKERY_IDEATION {
        engine().step(&mut s, t).unwrap();
        for (id, resolved) in &prev {
            assert!(s.externals.milestones[id].resolved || !resolved);
        }
        assert!(s.externals.milestones.len() >= prev.len());
        prev = s.externals.milestones.iter().map(|(k, m)| (k.clone(), m.resolved)).collect();
    }
}

#[test]
fn snapshot_round_trip_continues_identically() {
    for cut in 0..BAKERY_IDEATION.len() {
        let (mut live, _) = run(&BAKERY_IDEATION[..cut]);
        let mut restored = Session::from_json(&live.to_json().unwrap()).unwrap();
        assert_eq!(restored, live);
        for t in &BAKERY_IDEATION[cut..] {
            let a = engine().step(&mut live, t).unwrap();
            let b = engine().step(&mut restored, t).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }
}

#[test]
fn replay_from_event_log_reproduces_texts() {
    let (s, outs) = run(&BAKERY_IDEATION);
    let (again, outs2) = engine().replay("s", s.profile.clone(), s.config.clone(), &s.user_texts()).unwrap();
    assert_eq!(again, s);
    assert_eq!(outs, outs2);
}

#[test]
fn entity_priorities_stay_in_unit_interval() {
    let (s, _) = run(&BAKERY_IDEATION[..7]);
    for e in &s.entities {
        assert!((0.0..=1.0).contains(&e.priority), "{e:?}");
    }
    for m in s.milestones.values() {
        assert!((0.0..=1.0).contains(&m.priority));
    }
    let location = s.entities.iter().find(|e| e.entity_type == "Location").unwrap();
    assert!(location.priority > INITIAL_ENTITY_PRIORITY);
}

#[test]
fn completed_milestone_masks_its_subtree() {
    let (s, _) = run(&BAKERY_IDEATION[..4]);
    assert!(s.mask.contains("4.1"), "{:?}", s.mask);
    assert!(s.mask.contains("4.2"));
    assert!(!s.mask.contains("1"));
}

#[test]
fn permits_subtree_masked_once_m5_complete() {
    let mut texts = BAKERY_IDEATION[..7].to_vec();
    texts.extend(["What permits do I need to open?", "I'll get a business license from the city."]);
    let (mut s, _) = run(&texts);
    assert!(s.milestones["m5"].is_complete());
    assert!(s.mask.contains("1"));
    let o = engine().step(&mut s, "What about permits?").unwrap();
    let intent = o.decisions.intent.unwrap();
    assert_eq!(intent.conversational, "factual-question");
    assert_eq!(intent.domain, None);
}

/// Fails every call, to exercise the apology path.
struct Broken;

impl NluProvider for Broken {
    fn name(&self) -> &str {
        "broken"
    }

    fn capabilities(&self) -> BTreeSet<Capability> {
        [Capability::Intent, Capability::Entity, Capability::Milestone].into()
    }

    fn recognize_intent(&self, _req: &IntentRequest<'_>) -> Result<IntentResult, NluError> {
        Err(NluError::Provider("timeout".into()))
    }

    fn extract_milestones(
        &self,
        _u: &Utterance,
        _h: &ConversationHistory,
        _r: &ExternalRegistry,
    ) -> Result<mission_core::nlu::MilestoneUpdate, NluError> {
        Ok(Default::default())
    }
}

#[test]
fn provider_failure_apologizes_and_keeps_state() {
    let mut e = engine().clone();
    e.nlu = Arc::new(Broken);
    let mut s = e.create_session("b", profile(&[]), SessionConfig::default()).unwrap();
    let before = s.clone();
    let o = e.step(&mut s, BAKERY_IDEATION[0]).unwrap();
    assert_eq!(o.system_utterances.len(), 1);
    assert_eq!(o.system_utterances[0].act, UtteranceAct::Apology);
    assert!(o.decisions.error.as_deref().unwrap().contains("timeout"));
    assert_eq!(s, before);
}

#[test]
fn missing_capability_is_reported() {
    struct Mute;
    impl NluProvider for Mute {
        fn name(&self) -> &str {
            "mute"
        }
        fn capabilities(&self) -> BTreeSet<Capability> {
            BTreeSet::new()
        }
    }
    let mut e = engine().clone();
    e.nlu = Arc::new(Mute);
    let err = e.create_session("m", profile(&["work authorization: yes"]), SessionConfig::default()).unwrap_err();
    assert!(matches!(err, EngineError::Nlu(NluError::Unsupported { .. })));
}

#[test]
fn malformed_fixture_names_file_and_line() {
    let mut src = FixtureSources::shipped();
    let broken = format!("{}\nnode oops\n", mission_core::fixtures::KB);
    src.kb = &broken;
    match Engine::load(&src) {
        Err(EngineError::FixtureLoad { file, message }) => {
            assert_eq!(file, "kb");
            assert!(message.starts_with("line "), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_utterance_is_rejected() {
    let mut s = session();
    assert_eq!(engine().step(&mut s, "   ").unwrap_err(), EngineError::EmptyUtterance);
    assert_eq!(s.history.utterances.len(), 0);
}
