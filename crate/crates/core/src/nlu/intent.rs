//! Additive rule scoring of conversational and domain intents.
//!
//! A node's score is the sum of the weights of its matching rules plus, when
//! at least one rule matched, a bonus for every entity type already in H_E
//! that belongs to the node's vocabulary. The floor and the bonus are given in
//! units of the lexicon's smallest rule weight, so multiplying every weight by
//! a positive constant scales all scores alike and never changes the labels.

use std::collections::{BTreeMap, BTreeSet};

use super::lexicon::{IntentTarget, Lexicon};
use super::NluError;
use crate::model::{
    is_under, node_depth, ConversationHistory, IntentHierarchy, IntentResult, SessionConfig, Speaker, Utterance,
    UtteranceAct,
};

/// Scores within this relative distance are treated as tied.
const TIE_EPSILON: f64 = 1e-9;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_EPSILON * a.abs().max(b.abs())
}

pub(crate) fn normalize_quotes(text: &str) -> String {
    text.replace(['\u{2019}', '\u{2018}'], "'")
}

/// Entity types in H_E from earlier user turns, limited to the configured window.
pub fn history_entity_types(history: &ConversationHistory, current: &str, window: Option<usize>) -> BTreeSet<String> {
    let prior: Vec<&str> = history
        .utterances
        .iter()
        .filter(|u| u.speaker == Speaker::User && u.id != current)
        .map(|u| u.id.as_str())
        .collect();
    let keep: BTreeSet<&str> = match window {
        Some(n) => prior.iter().rev().take(n).copied().collect(),
        None => prior.into_iter().collect(),
    };
    history
        .entities
        .iter()
        .filter(|set| keep.contains(set.utterance_id.as_str()))
        .flat_map(|set| set.entities.iter().map(|e| e.entity_type.clone()))
        .collect()
}

/// Domain score of every unmasked node with at least one matching rule.
pub fn domain_scores(
    lexicon: &Lexicon,
    text: &str,
    hierarchy: &IntentHierarchy,
    history_types: &BTreeSet<String>,
    config: &SessionConfig,
    mask: &BTreeSet<String>,
) -> BTreeMap<String, f64> {
    let text = normalize_quotes(text);
    let unit = lexicon.weight_unit();
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for rule in &lexicon.intent_rules {
        if let IntentTarget::Node(node) = &rule.target {
            if rule.pattern.is_match(&text) {
                *scores.entry(node.clone()).or_default() += rule.weight;
            }
        }
    }
    scores.retain(|node, _| hierarchy.contains(node) && !mask.iter().any(|m| is_under(node, m)));
    for (node, score) in scores.iter_mut() {
        if let Some(vocab) = lexicon.node_vocabulary.get(node) {
            let hits = vocab.intersection(history_types).count();
            *score += config.history_bonus * unit * hits as f64;
        }
    }
    scores
}

/// Conversational category scores, in lexicon category order.
pub fn conversational_scores(lexicon: &Lexicon, text: &str) -> Vec<(String, f64)> {
    let text = normalize_quotes(text);
    let mut by_cat: BTreeMap<&str, f64> = BTreeMap::new();
    for rule in &lexicon.intent_rules {
        if let IntentTarget::Category(c) = &rule.target {
            if rule.pattern.is_match(&text) {
                *by_cat.entry(c.as_str()).or_default() += rule.weight;
            }
        }
    }
    lexicon.categories.iter().filter_map(|c| by_cat.get(c.as_str()).map(|s| (c.clone(), *s))).collect()
}

/// Best node: highest score, then shallower depth, then smaller id.
fn best_node(scores: &BTreeMap<String, f64>) -> Option<(&String, f64)> {
    let mut best: Option<(&String, f64)> = None;
    for (node, &score) in scores {
        best = match best {
            None => Some((node, score)),
            Some((b, bs)) => {
                let better = if tied(score, bs) {
                    (node_depth(node), node.as_str()) < (node_depth(b), b.as_str())
                } else {
                    score > bs
                };
                if better {
                    Some((node, score))
                } else {
                    Some((b, bs))
                }
            }
        };
    }
    best
}

fn fallback_category(lexicon: &Lexicon, u: &Utterance, history: &ConversationHistory) -> String {
    let f = &lexicon.fallbacks;
    let earlier_user = history.utterances.iter().any(|x| x.speaker == Speaker::User && x.id != u.id);
    if !earlier_user {
        return f.first_turn.clone();
    }
    let last_system = history.utterances.iter().rev().find(|x| x.speaker == Speaker::System);
    match last_system {
        Some(s) if s.act == UtteranceAct::Clarification || s.act == UtteranceAct::ExternalClarification => {
            f.after_clarification.clone()
        }
        Some(s) if s.text.trim_end().ends_with('?') => f.after_question.clone(),
        _ => f.otherwise.clone(),
    }
}

/// Recognizes the (conversational, domain) intent of a user utterance.
///
/// `mask` lists hierarchy roots whose subtrees may not win.
pub fn recognize_intent(
    lexicon: &Lexicon,
    u: &Utterance,
    hierarchy: &IntentHierarchy,
    history: &ConversationHistory,
    config: &SessionConfig,
    mask: &BTreeSet<String>,
) -> Result<IntentResult, NluError> {
    if u.speaker != Speaker::User {
        return Err(NluError::NotUserUtterance(u.id.clone()));
    }
    if u.text.trim().is_empty() {
        return Err(NluError::EmptyUtterance);
    }
    if hierarchy.is_empty() {
        return Err(NluError::EmptyHierarchy);
    }
    let types = history_entity_types(history, &u.id, config.history_window);
    let scores = domain_scores(lexicon, &u.text, hierarchy, &types, config, mask);
    let floor = config.intent_floor * lexicon.weight_unit();
    let (domain, domain_score) = match best_node(&scores) {
        Some((node, s)) if s >= floor || tied(s, floor) => (Some(node.clone()), s),
        _ => (None, 0.0),
    };

    let conv = conversational_scores(lexicon, &u.text);
    let mut best: Option<(String, f64)> = None;
    for (c, s) in conv {
        match &best {
            Some((_, bs)) if !(s > *bs && !tied(s, *bs)) => {}
            _ => best = Some((c, s)),
        }
    }
    let (conversational, conversational_score) = best.unwrap_or_else(|| (fallback_category(lexicon, u, history), 0.0));

    Ok(IntentResult {
        conversational,
        domain,
        score: conversational_score + domain_score,
        conversational_score,
        domain_score,
        timestamp: u.timestamp,
        utterance_id: u.id.clone(),
    })
}
