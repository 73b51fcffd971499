//! Rendering of fact sets into chunked, readability-levelled text.

use std::collections::BTreeSet;

use super::library::{fill, ResponseLibrary, ResponseTemplate};
use super::ResponseError;
use crate::kb::FactSet;
use crate::model::{EntityRequirement, ExternalMilestone, ReadabilityLevel};
use crate::text::split_sentences;

/// Upper bound on the length of one response chunk, in characters.
pub const MAX_CHUNK_CHARS: usize = 400;

/// "a", "a and b", "a, b, and c".
pub fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [rest @ .., last] => format!("{}, and {last}", rest.join(", ")),
    }
}

fn context_value(lib: &ResponseLibrary, f: &FactSet, slot: &str) -> Result<String, ResponseError> {
    f.context
        .get(slot)
        .or_else(|| lib.defaults.get(slot))
        .cloned()
        .ok_or_else(|| ResponseError::SlotUnfilled(slot.to_string()))
}

fn slot_value(lib: &ResponseLibrary, t: &ResponseTemplate, f: &FactSet, slot: &str) -> Result<String, ResponseError> {
    if slot.contains('.') {
        let values: Vec<String> = f.values_of(slot).into_iter().take(t.max_slots).map(|v| v.to_string()).collect();
        if values.is_empty() {
            return Err(ResponseError::SlotUnfilled(slot.to_string()));
        }
        Ok(join_list(&values))
    } else {
        context_value(lib, f, slot)
    }
}

/// Sentences for one fact set, before glossary expansion and chunking.
pub fn render_sentences(
    lib: &ResponseLibrary,
    f: &FactSet,
    level: ReadabilityLevel,
) -> Result<Vec<String>, ResponseError> {
    let t = lib.template(&f.axis)?;
    let mut text = if f.is_empty() {
        fill(&t.empty, |s| context_value(lib, f, s))?
    } else {
        fill(t.levels.get(level), |s| slot_value(lib, t, f, s))?
    };
    if !f.is_empty() {
        for (projection, extra) in &t.optional_text {
            if !f.values_of(projection).is_empty() {
                text.push(' ');
                text.push_str(&fill(extra, |s| slot_value(lib, t, f, s))?);
            }
        }
    }
    Ok(split_sentences(&text).into_iter().map(String::from).collect())
}

/// At the basic level, follows the first sentence using each jargon term with its expansion.
pub fn add_glossary(lib: &ResponseLibrary, sentences: Vec<String>, level: ReadabilityLevel) -> Vec<String> {
    if level != ReadabilityLevel::Basic {
        return sentences;
    }
    let mut explained = BTreeSet::new();
    let mut out = Vec::with_capacity(sentences.len());
    for s in sentences {
        let terms: Vec<usize> =
            lib.jargon.iter().filter(|(re, i)| !explained.contains(i) && re.is_match(&s)).map(|(_, i)| *i).collect();
        out.push(s);
        for i in terms {
            explained.insert(i);
            out.push(lib.glossary[i].expansion.clone());
        }
    }
    out
}

/// Greedily packs sentences into chunks of at most [`MAX_CHUNK_CHARS`] characters.
/// A sentence longer than the bound is broken at spaces.
pub fn pack_chunks(sentences: &[String]) -> Vec<String> {
    let mut chunks: Vec<String> = Vec::new();
    let mut cur = String::new();
    let len = |s: &str| s.chars().count();
    let push_piece = |piece: &str, cur: &mut String, chunks: &mut Vec<String>| {
        if !cur.is_empty() && len(cur) + 1 + len(piece) > MAX_CHUNK_CHARS {
            chunks.push(std::mem::take(cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(piece);
    };
    for s in sentences {
        if len(s) <= MAX_CHUNK_CHARS {
            push_piece(s, &mut cur, &mut chunks);
            continue;
        }
        let mut line = String::new();
        for word in s.split_whitespace() {
            if !line.is_empty() && len(&line) + 1 + len(word) > MAX_CHUNK_CHARS {
                push_piece(&std::mem::take(&mut line), &mut cur, &mut chunks);
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(word);
        }
        if !line.is_empty() {
            push_piece(&line, &mut cur, &mut chunks);
        }
    }
    if !cur.is_empty() {
        chunks.push(cur);
    }
    chunks
}

/// Renders the fact sets of one turn in axis order and, when asked, closes
/// with the follow-up question of the last template that has one.
pub fn compose_turn(
    lib: &ResponseLibrary,
    factsets: &[FactSet],
    level: ReadabilityLevel,
    max_chunks: usize,
    follow_up: bool,
) -> Result<Vec<String>, ResponseError> {
    let mut sentences = Vec::new();
    for f in factsets {
        sentences.extend(render_sentences(lib, f, level)?);
    }
    let mut sentences = add_glossary(lib, sentences, level);
    if follow_up {
        let last = factsets
            .iter()
            .rev()
            .find_map(|f| lib.templates.get(&f.axis).and_then(|t| t.follow_up.as_ref()).map(|q| (f, q)));
        if let Some((f, q)) = last {
            sentences.push(fill(q, |s| context_value(lib, f, s))?);
        }
    }
    let chunks = pack_chunks(&sentences);
    if chunks.len() > max_chunks {
        return Err(ResponseError::ChunkOverflow { chunks: chunks.len(), max: max_chunks });
    }
    Ok(chunks)
}

/// Renders a single fact set.
pub fn generate_response(
    lib: &ResponseLibrary,
    f: &FactSet,
    level: ReadabilityLevel,
    max_chunks: usize,
    follow_up: bool,
) -> Result<Vec<String>, ResponseError> {
    compose_turn(lib, std::slice::from_ref(f), level, max_chunks, follow_up)
}

/// Something the conversation still needs from the user.
#[derive(Debug, Clone, PartialEq)]
pub enum ClarificationItem {
    Requirement(EntityRequirement),
    External(ExternalMilestone),
}

/// One question about the highest-priority item; earlier items win ties.
pub fn get_clarification(lib: &ResponseLibrary, missing: &[(ClarificationItem, f64)]) -> Result<String, ResponseError> {
    let mut best: Option<&(ClarificationItem, f64)> = None;
    for item in missing {
        if best.is_none_or(|b| item.1 > b.1) {
            best = Some(item);
        }
    }
    let (item, _) = best.ok_or(ResponseError::EmptyMissingSet)?;
    let table = &lib.clarify;
    match item {
        ClarificationItem::Requirement(r) => {
            let wording = table.types.get(&r.entity_type).unwrap_or(&table.default);
            fill(wording, |s| match s {
                "label" => Ok(r.label.clone()),
                other => Err(ResponseError::SlotUnfilled(other.to_string())),
            })
        }
        ClarificationItem::External(m) => fill(table.external(m.kind), |s| match s {
            "description" => Ok(m.description.clone()),
            other => Err(ResponseError::SlotUnfilled(other.to_string())),
        }),
    }
}
