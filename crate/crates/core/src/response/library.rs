//! Response templates, glossary and clarification wording, loaded from TOML.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;

use super::ResponseError;
use crate::kb::QueryTemplates;
use crate::model::{ExternalKind, ReadabilityLevel};
use crate::text::line_of;

pub const RESPONSE_VERSION: u32 = 1;

fn slot_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)?)\}").expect("slot regex"))
}

/// Names of the `{slot}` placeholders in `text`, in order of appearance.
pub fn slots_in(text: &str) -> Vec<String> {
    slot_re().captures_iter(text).map(|c| c[1].to_string()).collect()
}

/// Replaces every `{slot}` with the value the callback returns for it.
pub fn fill(text: &str, mut value: impl FnMut(&str) -> Result<String, ResponseError>) -> Result<String, ResponseError> {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for c in slot_re().captures_iter(text) {
        let m = c.get(0).expect("whole match");
        out.push_str(&text[last..m.start()]);
        out.push_str(&value(&c[1])?);
        last = m.end();
    }
    out.push_str(&text[last..]);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelVariants {
    pub basic: String,
    pub intermediate: String,
    pub advanced: String,
}

impl LevelVariants {
    pub fn get(&self, level: ReadabilityLevel) -> &str {
        match level {
            ReadabilityLevel::Basic => &self.basic,
            ReadabilityLevel::Intermediate => &self.intermediate,
            ReadabilityLevel::Advanced => &self.advanced,
        }
    }

    fn all(&self) -> [&str; 3] {
        [&self.basic, &self.intermediate, &self.advanced]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseTemplate {
    pub id: String,
    pub axis: String,
    pub levels: LevelVariants,
    /// Sentences rendered only when an optional projection has values.
    #[serde(default)]
    pub optional_text: BTreeMap<String, String>,
    /// Rendered instead of the level text when no fact matched.
    pub empty: String,
    pub follow_up: Option<String>,
    /// Most distinct values listed per slot.
    #[serde(default = "default_max_slots")]
    pub max_slots: usize,
}

fn default_max_slots() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlossaryTerm {
    pub term: String,
    pub expansion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClarificationTable {
    /// Used for entity types without their own wording; `{label}` is the requirement label.
    pub default: String,
    #[serde(default)]
    pub types: BTreeMap<String, String>,
    pub user_state: String,
    pub business: String,
}

impl ClarificationTable {
    pub fn external(&self, kind: ExternalKind) -> &str {
        match kind {
            ExternalKind::UserState => &self.user_state,
            ExternalKind::Business => &self.business,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Messages {
    pub farewell: String,
    pub topic_drift: String,
    pub stagnation: String,
    pub apology: String,
    pub no_template: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLibrary {
    version: u32,
    #[serde(default)]
    defaults: BTreeMap<String, String>,
    messages: Messages,
    clarify: ClarificationTable,
    #[serde(default, rename = "glossary")]
    glossary: Vec<GlossaryTerm>,
    #[serde(default, rename = "template")]
    templates: Vec<toml::Spanned<ResponseTemplate>>,
}

#[derive(Debug, Clone)]
pub struct ResponseLibrary {
    pub templates: BTreeMap<String, ResponseTemplate>,
    /// Stand-in text for context slots with no entity.
    pub defaults: BTreeMap<String, String>,
    pub messages: Messages,
    pub clarify: ClarificationTable,
    pub glossary: Vec<GlossaryTerm>,
    pub(crate) jargon: Vec<(Regex, usize)>,
}

impl ResponseLibrary {
    /// Parses the template file and checks it against the query templates:
    /// one response template per axis, slots drawn from what the axis
    /// provides, and every projection rendered at every level.
    pub fn parse(text: &str, queries: &QueryTemplates) -> Result<Self, ResponseError> {
        let raw: RawLibrary = toml::from_str(text).map_err(|e| ResponseError::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        if raw.version != RESPONSE_VERSION {
            return Err(ResponseError::Parse {
                line: 1,
                message: format!("unsupported response file version {}", raw.version),
            });
        }
        let mut templates = BTreeMap::new();
        for spanned in raw.templates {
            let line = line_of(text, spanned.span().start);
            let t = spanned.into_inner();
            let at = |message: String| ResponseError::Parse { line, message };
            let q = queries.by_axis(&t.axis).ok_or_else(|| at(format!("no query template serves axis {}", t.axis)))?;
            let provided = q.provided_slots();
            let context: BTreeSet<String> = q.slot_types().into_iter().chain(q.context.iter().cloned()).collect();
            let mut texts: Vec<&str> = t.levels.all().to_vec();
            texts.push(&t.empty);
            texts.extend(t.optional_text.values().map(String::as_str));
            texts.extend(t.follow_up.as_deref());
            for s in texts.iter().flat_map(|x| slots_in(x)) {
                if !provided.contains(&s) {
                    return Err(at(format!(
                        "template {} uses slot {{{s}}} that axis {} does not provide",
                        t.id, t.axis
                    )));
                }
            }
            for s in
                slots_in(&t.empty).iter().chain(t.follow_up.iter().flat_map(|f| slots_in(f)).collect::<Vec<_>>().iter())
            {
                if !context.contains(s) {
                    return Err(at(format!("template {}: {{{s}}} outside the fact text must be an entity slot", t.id)));
                }
            }
            for variant in t.levels.all() {
                let used: BTreeSet<String> = slots_in(variant).into_iter().collect();
                for p in &q.project {
                    if !used.contains(&p.to_string()) {
                        return Err(at(format!("template {} does not render projection {p} at every level", t.id)));
                    }
                }
            }
            for o in q.optional.iter().flat_map(|o| o.project.iter()) {
                let key = o.to_string();
                if !t.optional_text.get(&key).is_some_and(|s| slots_in(s).contains(&key)) {
                    return Err(at(format!("template {} needs optional_text rendering {key}", t.id)));
                }
            }
            if t.max_slots == 0 {
                return Err(at("max_slots must be positive".into()));
            }
            if templates.insert(t.axis.clone(), t).is_some() {
                return Err(at("axis has two response templates".into()));
            }
        }
        for q in queries.templates() {
            if !templates.contains_key(&q.axis) {
                return Err(ResponseError::MissingTemplate(q.axis.clone()));
            }
        }
        let m = &raw.messages;
        for text in [&m.farewell, &m.topic_drift, &m.stagnation, &m.apology, &m.no_template] {
            if let Some(s) = slots_in(text).into_iter().find(|s| !raw.defaults.contains_key(s)) {
                return Err(ResponseError::Invalid(format!("message slot {{{s}}} has no default")));
            }
        }
        let mut jargon = Vec::new();
        for (i, g) in raw.glossary.iter().enumerate() {
            let re = Regex::new(&format!(r"(?i)\b{}\b", regex::escape(&g.term)))
                .map_err(|e| ResponseError::Invalid(e.to_string()))?;
            jargon.push((re, i));
        }
        Ok(Self {
            templates,
            defaults: raw.defaults,
            messages: raw.messages,
            clarify: raw.clarify,
            glossary: raw.glossary,
            jargon,
        })
    }

    /// Fills a message with entity displays, falling back to `[defaults]`.
    pub fn render_message(&self, text: &str, context: &BTreeMap<String, String>) -> Result<String, ResponseError> {
        fill(text, |s| {
            context
                .get(s)
                .or_else(|| self.defaults.get(s))
                .cloned()
                .ok_or_else(|| ResponseError::SlotUnfilled(s.to_string()))
        })
    }

    pub fn template(&self, axis: &str) -> Result<&ResponseTemplate, ResponseError> {
        self.templates.get(axis).ok_or_else(|| ResponseError::MissingTemplate(axis.to_string()))
    }
}
