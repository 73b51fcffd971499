//! Rule tables for intent and entity recognition, loaded from TOML.

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::Deserialize;

use super::NluError;
use crate::kb::KnowledgeGraph;
use crate::model::{IntentHierarchy, DEFAULT_CATEGORIES};
use crate::text::line_of;

pub const LEXICON_VERSION: u32 = 1;

/// What an intent rule votes for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum IntentTarget {
    Node(String),
    Category(String),
}

#[derive(Debug, Clone)]
pub struct IntentRule {
    pub pattern: Regex,
    pub target: IntentTarget,
    pub weight: f64,
}

/// Fixed surface terms for one entity value.
#[derive(Debug, Clone)]
pub struct GazetteerEntry {
    pub entity_type: String,
    pub value: String,
    /// Rendering form; `None` keeps the user's wording.
    pub display: Option<String>,
    pub pattern: Regex,
}

/// Maps the sentence around a money amount or percentage to an entity type.
#[derive(Debug, Clone)]
pub struct AmountRule {
    pub context: Regex,
    pub entity_type: String,
}

/// Free-text entity captured through the `value` group of a regex.
#[derive(Debug, Clone)]
pub struct PatternRule {
    pub entity_type: String,
    pub pattern: Regex,
}

/// Conversational category used when no conversational rule fires.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fallbacks {
    pub first_turn: String,
    pub after_clarification: String,
    pub after_question: String,
    pub otherwise: String,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    pub categories: Vec<String>,
    pub entity_types: Vec<String>,
    pub intent_rules: Vec<IntentRule>,
    pub node_vocabulary: BTreeMap<String, BTreeSet<String>>,
    pub gazetteer: Vec<GazetteerEntry>,
    pub amount_rules: Vec<AmountRule>,
    pub default_money_type: String,
    pub default_percent_type: String,
    pub patterns: Vec<PatternRule>,
    pub fallbacks: Fallbacks,
    kb_sources: Vec<KbSource>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct KbSource {
    label: String,
    attr: String,
    entity: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLexicon {
    version: u32,
    #[serde(default)]
    categories: Option<Vec<String>>,
    entity_types: Vec<String>,
    fallbacks: Fallbacks,
    #[serde(default, rename = "intent")]
    intents: Vec<RawIntent>,
    #[serde(default)]
    node_vocabulary: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    gazetteer: Vec<RawGazetteer>,
    #[serde(default)]
    kb_gazetteer: Vec<KbSource>,
    #[serde(default, rename = "amount")]
    amounts: Vec<RawAmount>,
    amount_defaults: RawAmountDefaults,
    #[serde(default, rename = "pattern")]
    patterns: Vec<RawPattern>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntent {
    pattern: toml::Spanned<String>,
    node: Option<String>,
    category: Option<String>,
    weight: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGazetteer {
    entity: toml::Spanned<String>,
    terms: Vec<String>,
    value: Option<String>,
    display: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAmount {
    context: toml::Spanned<String>,
    entity: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAmountDefaults {
    money: String,
    percent: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPattern {
    entity: String,
    regex: toml::Spanned<String>,
}

/// Case-insensitive regex; rule authors never write the flag themselves.
fn compile(pattern: &str) -> Result<Regex, String> {
    Regex::new(&format!("(?i){pattern}")).map_err(|e| e.to_string())
}

/// Word-bounded, whitespace-tolerant matcher for a literal term.
fn term_regex(terms: &[String]) -> Result<Regex, String> {
    let alts: Vec<String> =
        terms.iter().map(|t| t.split_whitespace().map(regex::escape).collect::<Vec<_>>().join(r"\s+")).collect();
    compile(&format!(r"\b(?:{})\b", alts.join("|")))
}

impl Lexicon {
    /// Parses and validates a lexicon against the hierarchy it scores.
    pub fn parse(text: &str, hierarchy: &IntentHierarchy) -> Result<Self, NluError> {
        let raw: RawLexicon = toml::from_str(text).map_err(|e| NluError::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        if raw.version != LEXICON_VERSION {
            return Err(NluError::Parse { line: 1, message: format!("unsupported lexicon version {}", raw.version) });
        }
        let categories = raw.categories.unwrap_or_else(|| DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect());
        let category_set: BTreeSet<&str> = categories.iter().map(String::as_str).collect();
        if category_set.len() != categories.len() || categories.is_empty() {
            return Err(NluError::Invalid("categories must be non-empty and unique".into()));
        }
        let f = &raw.fallbacks;
        for c in [&f.first_turn, &f.after_clarification, &f.after_question, &f.otherwise] {
            if !category_set.contains(c.as_str()) {
                return Err(NluError::Invalid(format!("fallback category {c} is not declared")));
            }
        }
        let types: BTreeSet<&str> = raw.entity_types.iter().map(String::as_str).collect();
        let check_type = |t: &str, line: usize| {
            if types.contains(t) {
                Ok(())
            } else {
                Err(NluError::Parse { line, message: format!("entity type {t} is not in entity_types") })
            }
        };

        let mut intent_rules = Vec::new();
        for r in raw.intents {
            let line = line_of(text, r.pattern.span().start);
            let at = |message: String| NluError::Parse { line, message };
            if !(r.weight.is_finite() && r.weight > 0.0) {
                return Err(at(format!("weight must be finite and positive, got {}", r.weight)));
            }
            let target = match (r.node, r.category) {
                (Some(n), None) => {
                    if !hierarchy.contains(&n) {
                        return Err(at(format!("unknown hierarchy node {n}")));
                    }
                    IntentTarget::Node(n)
                }
                (None, Some(c)) => {
                    if !category_set.contains(c.as_str()) {
                        return Err(at(format!("unknown category {c}")));
                    }
                    IntentTarget::Category(c)
                }
                _ => return Err(at("intent rule needs exactly one of `node` or `category`".into())),
            };
            let pattern = compile(r.pattern.get_ref()).map_err(at)?;
            intent_rules.push(IntentRule { pattern, target, weight: r.weight });
        }

        let mut node_vocabulary = BTreeMap::new();
        for (node, vocab) in raw.node_vocabulary {
            if !hierarchy.contains(&node) {
                return Err(NluError::Invalid(format!("node_vocabulary names unknown node {node}")));
            }
            for t in &vocab {
                check_type(t, 0)?;
            }
            node_vocabulary.insert(node, vocab.into_iter().collect());
        }

        let mut gazetteer = Vec::new();
        for g in raw.gazetteer {
            let line = line_of(text, g.entity.span().start);
            check_type(g.entity.get_ref(), line)?;
            if g.terms.is_empty() {
                return Err(NluError::Parse { line, message: "gazetteer entry has no terms".into() });
            }
            let pattern = term_regex(&g.terms).map_err(|message| NluError::Parse { line, message })?;
            gazetteer.push(GazetteerEntry {
                entity_type: g.entity.into_inner(),
                value: g.value.unwrap_or_else(|| g.terms[0].clone()),
                display: g.display,
                pattern,
            });
        }
        for s in &raw.kb_gazetteer {
            check_type(&s.entity, 0)?;
        }

        let mut amount_rules = Vec::new();
        for a in raw.amounts {
            let line = line_of(text, a.context.span().start);
            check_type(&a.entity, line)?;
            let context = compile(a.context.get_ref()).map_err(|message| NluError::Parse { line, message })?;
            amount_rules.push(AmountRule { context, entity_type: a.entity });
        }
        check_type(&raw.amount_defaults.money, 0)?;
        check_type(&raw.amount_defaults.percent, 0)?;

        let mut patterns = Vec::new();
        for p in raw.patterns {
            let line = line_of(text, p.regex.span().start);
            check_type(&p.entity, line)?;
            let pattern = compile(p.regex.get_ref()).map_err(|message| NluError::Parse { line, message })?;
            if !pattern.capture_names().any(|n| n == Some("value")) {
                return Err(NluError::Parse { line, message: "pattern needs a `value` capture group".into() });
            }
            patterns.push(PatternRule { entity_type: p.entity, pattern });
        }

        Ok(Self {
            categories,
            entity_types: raw.entity_types,
            intent_rules,
            node_vocabulary,
            gazetteer,
            amount_rules,
            default_money_type: raw.amount_defaults.money,
            default_percent_type: raw.amount_defaults.percent,
            patterns,
            fallbacks: raw.fallbacks,
            kb_sources: raw.kb_gazetteer,
        })
    }

    /// Adds one gazetteer entry per distinct attribute value of the configured KB labels.
    pub fn with_kb_terms(mut self, kg: &KnowledgeGraph) -> Result<Self, NluError> {
        for s in &self.kb_sources {
            let mut names = BTreeSet::new();
            for id in kg.with_label(&s.label) {
                if let Some(v) = kg.node(id).and_then(|n| n.attrs.get(&s.attr)) {
                    names.insert(v.to_string());
                }
            }
            if names.is_empty() {
                return Err(NluError::Invalid(format!("no {} node has attribute {}", s.label, s.attr)));
            }
            for name in names {
                let pattern = term_regex(std::slice::from_ref(&name)).map_err(NluError::Invalid)?;
                self.gazetteer.push(GazetteerEntry {
                    entity_type: s.entity.clone(),
                    value: name.clone(),
                    display: Some(name),
                    pattern,
                });
            }
        }
        Ok(self)
    }

    /// Smallest rule weight: the unit in which floors and bonuses are expressed.
    pub fn weight_unit(&self) -> f64 {
        let min = self.intent_rules.iter().map(|r| r.weight).fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            min
        } else {
            1.0
        }
    }

    /// Copy with every intent rule weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.intent_rules {
            r.weight *= c;
        }
        out
    }
}
