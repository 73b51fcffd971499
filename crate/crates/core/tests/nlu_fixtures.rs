use std::collections::BTreeSet;

use mission_core::fixtures;
use mission_core::kb::KnowledgeGraph;
use mission_core::model::*;
use mission_core::nlu::*;

fn setup() -> (Lexicon, MilestoneRules, IntentHierarchy) {
    let h = IntentHierarchy::parse(fixtures::HIERARCHY).unwrap();
    let kg = KnowledgeGraph::parse(fixtures::KB).unwrap();
    let lex = Lexicon::parse(fixtures::LEXICON, &h).unwrap().with_kb_terms(&kg).unwrap();
    let rules = MilestoneRules::parse(fixtures::MILESTONE_RULES).unwrap();
    (lex, rules, h)
}

fn user(n: u64, text: &str) -> Utterance {
    Utterance::user(format!("u{n}"), n, "tester", text)
}

fn intent(lex: &Lexicon, h: &IntentHierarchy, hist: &ConversationHistory, u: &Utterance) -> (String, Option<String>) {
    let r = recognize_intent(lex, u, h, hist, &SessionConfig::default(), &BTreeSet::new()).unwrap();
    (r.conversational, r.domain)
}

#[test]
fn permit_question_lands_in_permit_subtree() {
    let (lex, _, h) = setup();
    let u = user(1, "What permits do I need?");
    let mut hist = ConversationHistory::new();
    hist.append_utterance(u.clone()).unwrap();
    let (c, d) = intent(&lex, &h, &hist, &u);
    assert_eq!(c, "factual-question");
    assert!(is_under(d.as_deref().unwrap(), "1"));
}

#[test]
fn equal_scores_break_to_lexicographic_node() {
    let (lex, _, h) = setup();
    let u = user(1, "Will a loan cover the funding requirements?");
    let hist = ConversationHistory::new();
    let types = BTreeSet::new();
    let scores = domain_scores(&lex, &u.text, &h, &types, &SessionConfig::default(), &BTreeSet::new());
    assert_eq!(scores.get("3.2"), Some(&2.0));
    assert_eq!(scores.get("4.5"), Some(&2.0));
    assert_eq!(intent(&lex, &h, &hist, &u).1.as_deref(), Some("3.2"));
}

#[test]
fn unmatched_feedback_after_question_uses_history() {
    let (lex, _, h) = setup();
    let mut hist = ConversationHistory::new();
    hist.append_utterance(user(1, "I want to start a bakery in San Ysidro.")).unwrap();
    hist.append_utterance(Utterance::system("s1", 2, "Does this fit your vision?", UtteranceAct::Response)).unwrap();
    let u = user(3, "I like where this is going");
    hist.append_utterance(u.clone()).unwrap();
    assert_eq!(intent(&lex, &h, &hist, &u), ("feedback".to_string(), None));
}

#[test]
fn entity_examples() {
    let (lex, _, _) = setup();
    let hist = ConversationHistory::new();
    let set = extract_entities(&lex, &user(1, "starting a bakery in San Ysidro"), &hist).unwrap();
    let got: BTreeSet<_> = set.entities.iter().map(|e| (e.entity_type.clone(), e.value.canonical_string())).collect();
    let want: BTreeSet<_> = [("BusinessType", "bakery"), ("Location", "san ysidro")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(got, want);

    let set = extract_entities(&lex, &user(1, "I've secured a loan for $80,000"), &hist).unwrap();
    assert_eq!(set.entities.len(), 1);
    assert_eq!(set.entities[0].entity_type, "Funding");
    assert_eq!(set.entities[0].value, EntityValue::Money { cents: 8_000_000 });
    assert_eq!(set.entities[0].priority, 0.5);

    assert!(extract_entities(&lex, &user(1, "Hello there"), &hist).unwrap().entities.is_empty());
}

#[test]
fn repeated_entity_returns_existing_record() {
    let (lex, _, _) = setup();
    let mut hist = ConversationHistory::new();
    let u1 = user(1, "a bakery in San Ysidro");
    hist.append_utterance(u1.clone()).unwrap();
    let mut first = extract_entities(&lex, &u1, &hist).unwrap();
    first.entities[0].priority = 0.9;
    hist.append_entities(first.clone()).unwrap();
    hist.append_utterance(Utterance::system("s1", 2, "ok", UtteranceAct::Response)).unwrap();
    let u3 = user(3, "more about the bakery");
    hist.append_utterance(u3.clone()).unwrap();
    let again = extract_entities(&lex, &u3, &hist).unwrap();
    assert_eq!(again.entities, vec![first.entities[0].clone()]);
}

#[test]
fn milestone_examples() {
    let (_, rules, _) = setup();
    let hist = ConversationHistory::new();
    let mut reg = ExternalRegistry::default();
    let u7 = user(7, "Yes, and I've secured a loan for $80,000.");
    let found = extract_milestones(&rules, &u7, &hist, &reg).unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].kind, ExternalKind::UserState);
    assert_eq!(found[0].description, "financial readiness");
    assert!(found[0].resolved);
    assert_eq!(found[0].source_utterance_id.as_deref(), Some("u7"));
    reg.insert(found[0].clone());
    assert!(extract_milestones(&rules, &u7, &hist, &reg).unwrap().is_empty());

    let q = extract_milestones(&rules, &user(1, "Do I need a health permit?"), &hist, &reg).unwrap();
    assert_eq!(q.len(), 1);
    assert_eq!((q[0].kind, q[0].description.as_str(), q[0].resolved), (ExternalKind::Business, "health permit", false));
}

#[test]
fn resolution_of_registered_milestone() {
    let (_, rules, _) = setup();
    let mut reg = ExternalRegistry::default();
    reg.insert(ExternalMilestone::new(ExternalKind::Business, "health permit", false, None));
    let asked = user(2, "Should I apply for the health permit now?");
    assert!(detect_resolutions(&rules, &asked, &reg).is_empty());
    let done = user(4, "I've obtained the health permit.");
    assert_eq!(detect_resolutions(&rules, &done, &reg), vec!["ext:business:health-permit".to_string()]);
}

#[test]
fn registration_facts_seed_resolved_milestones() {
    let (_, rules, _) = setup();
    let facts: BTreeSet<String> = ["work authorization: yes".to_string()].into();
    let ms = registration_milestones(&rules, &facts).unwrap();
    assert_eq!(ms[0].id, "ext:user_state:work-authorization");
    assert!(ms[0].resolved);
    assert_eq!(ms[0].source_utterance_id.as_deref(), Some(REGISTRATION_SOURCE));
}

#[test]
fn malformed_rule_reports_line() {
    let h = IntentHierarchy::parse(fixtures::HIERARCHY).unwrap();
    let bad = fixtures::LEXICON.replacen(r"'\bpermits?\b'", r"'\bpermits?(\b'", 1);
    let line = fixtures::LEXICON.lines().position(|l| l.contains(r"'\bpermits?\b'")).unwrap() + 1;
    match Lexicon::parse(&bad, &h) {
        Err(NluError::Parse { line: l, .. }) => assert_eq!(l, line),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn provider_declares_capabilities() {
    let (lex, rules, _) = setup();
    let p = RuleProvider { lexicon: lex, milestone_rules: rules };
    for c in [Capability::Intent, Capability::Entity, Capability::Milestone] {
        ensure_capability(&p, c).unwrap();
    }
}
