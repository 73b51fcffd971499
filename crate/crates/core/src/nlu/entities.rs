//! Gazetteer and pattern based entity extraction.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use super::intent::normalize_quotes;
use super::lexicon::Lexicon;
use super::NluError;
use crate::model::{ConversationHistory, Entity, EntityOrigin, EntitySet, EntityValue, Speaker, Utterance};

fn amount_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let amount = r"\$\s*(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d{1,2})?(?:\s*[kK]\b)?";
        let bare = r"\$?\s*(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d{1,2})?(?:\s*[kK]\b)?";
        Regex::new(&format!(r"{amount}(?:\s*(?:-|–|to)\s*{bare})?|\b\d+(?:\.\d{{1,2}})?\s*%")).expect("amount regex")
    })
}

/// Bounds of the sentence around `start..end`.
fn sentence_around(text: &str, start: usize, end: usize) -> &str {
    let is_break = |i: usize| {
        let b = text.as_bytes();
        matches!(b[i], b'.' | b'!' | b'?' | b';') && b.get(i + 1).is_none_or(|c| c.is_ascii_whitespace())
    };
    let from = (0..start).rev().find(|&i| is_break(i)).map(|i| i + 1).unwrap_or(0);
    let to = (end..text.len()).find(|&i| is_break(i)).unwrap_or(text.len());
    &text[from..to]
}

/// Type of the amount rule whose context keyword sits closest to the amount
/// within its sentence; earlier rules win ties.
fn nearest_amount_rule(lexicon: &Lexicon, text: &str, start: usize, end: usize) -> Option<String> {
    let sentence = sentence_around(text, start, end);
    let offset = sentence.as_ptr() as usize - text.as_ptr() as usize;
    let (start, end) = (start - offset, end - offset);
    let gap = |a: usize, b: usize| {
        if b <= start {
            start - b
        } else {
            a.saturating_sub(end)
        }
    };
    lexicon
        .amount_rules
        .iter()
        .filter_map(|r| r.context.find_iter(sentence).map(|k| gap(k.start(), k.end())).min().map(|d| (d, r)))
        .min_by_key(|(d, _)| *d)
        .map(|(_, r)| r.entity_type.clone())
}

struct Candidate {
    start: usize,
    end: usize,
    entity_type: String,
    raw: String,
    display: String,
}

/// Extracts the entities of a user utterance.
///
/// Entities already recorded in H_E are returned as their existing record.
pub fn extract_entities(
    lexicon: &Lexicon,
    u: &Utterance,
    history: &ConversationHistory,
) -> Result<EntitySet, NluError> {
    if u.speaker != Speaker::User {
        return Err(NluError::NotUserUtterance(u.id.clone()));
    }
    let text = normalize_quotes(&u.text);
    let mut candidates = Vec::new();
    for g in &lexicon.gazetteer {
        for m in g.pattern.find_iter(&text) {
            candidates.push(Candidate {
                start: m.start(),
                end: m.end(),
                entity_type: g.entity_type.clone(),
                raw: g.value.clone(),
                display: g.display.clone().unwrap_or_else(|| m.as_str().to_string()),
            });
        }
    }
    for p in &lexicon.patterns {
        for caps in p.pattern.captures_iter(&text) {
            let v = caps.name("value").expect("validated capture group");
            let value = v.as_str().trim();
            if value.is_empty() {
                continue;
            }
            candidates.push(Candidate {
                start: v.start(),
                end: v.end(),
                entity_type: p.entity_type.clone(),
                raw: value.to_string(),
                display: value.to_string(),
            });
        }
    }
    for m in amount_re().find_iter(&text) {
        let value = EntityValue::parse(m.as_str());
        let is_percent = matches!(value, EntityValue::Percent { .. });
        if matches!(value, EntityValue::Text { .. }) {
            continue;
        }
        let entity_type = nearest_amount_rule(lexicon, &text, m.start(), m.end()).unwrap_or_else(|| {
            if is_percent {
                lexicon.default_percent_type.clone()
            } else {
                lexicon.default_money_type.clone()
            }
        });
        let display = match &value {
            EntityValue::MoneyRange { low_cents, high_cents } => {
                format!("{} to {}", crate::model::format_cents(*low_cents), crate::model::format_cents(*high_cents))
            }
            v => v.canonical_string(),
        };
        candidates.push(Candidate {
            start: m.start(),
            end: m.end(),
            entity_type,
            raw: m.as_str().to_string(),
            display,
        });
    }

    // Longest match wins at each position; overlapping shorter matches are dropped.
    candidates.sort_by(|a, b| a.start.cmp(&b.start).then((b.end - b.start).cmp(&(a.end - a.start))));
    let mut kept: Vec<Candidate> = Vec::new();
    for c in candidates {
        if kept.last().is_none_or(|k| c.start >= k.end) {
            kept.push(c);
        }
    }

    let mut seen = BTreeSet::new();
    let mut entities = Vec::new();
    for c in kept {
        let fresh = Entity::new(c.entity_type, &c.raw, c.display, u.id.clone(), u.timestamp);
        let key = fresh.key();
        if !seen.insert(key.clone()) {
            continue;
        }
        let existing = history.all_entities().filter(|e| e.key() == key).last().cloned();
        entities.push(existing.unwrap_or(fresh));
    }
    Ok(EntitySet { utterance_id: u.id.clone(), timestamp: u.timestamp, origin: EntityOrigin::User, entities })
}
