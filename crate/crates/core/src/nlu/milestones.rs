//! Rule table for external milestones mentioned in conversation.

use std::collections::BTreeSet;

use regex::Regex;
use serde::Deserialize;

use super::intent::normalize_quotes;
use super::NluError;
use crate::model::{
    canonical_text, ConversationHistory, ExternalKind, ExternalMilestone, ExternalRegistry, Speaker, Utterance,
    REGISTRATION_SOURCE,
};
use crate::text::{line_of, split_sentences};

pub const MILESTONE_RULES_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct MilestoneRule {
    pub pattern: Regex,
    pub kind: ExternalKind,
    pub description: String,
}

#[derive(Debug, Clone)]
pub struct MilestoneRules {
    pub rules: Vec<MilestoneRule>,
    /// Phrasing that reports the milestone as done ("I've secured ...").
    pub completion: Regex,
    /// Phrasing that asks about it instead.
    pub question: Regex,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRules {
    version: u32,
    completion: toml::Spanned<String>,
    question: toml::Spanned<String>,
    #[serde(default, rename = "rule")]
    rules: Vec<RawRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    pattern: toml::Spanned<String>,
    kind: ExternalKind,
    description: String,
}

impl MilestoneRules {
    pub fn parse(text: &str) -> Result<Self, NluError> {
        let raw: RawRules = toml::from_str(text).map_err(|e| NluError::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        if raw.version != MILESTONE_RULES_VERSION {
            return Err(NluError::Parse {
                line: 1,
                message: format!("unsupported milestone rule version {}", raw.version),
            });
        }
        let compile = |s: &toml::Spanned<String>| {
            Regex::new(&format!("(?i){}", s.get_ref()))
                .map_err(|e| NluError::Parse { line: line_of(text, s.span().start), message: e.to_string() })
        };
        let mut rules = Vec::new();
        for r in &raw.rules {
            if canonical_text(&r.description).is_empty() {
                return Err(NluError::Parse {
                    line: line_of(text, r.pattern.span().start),
                    message: "empty description".into(),
                });
            }
            rules.push(MilestoneRule {
                pattern: compile(&r.pattern)?,
                kind: r.kind,
                description: canonical_text(&r.description),
            });
        }
        Ok(Self { rules, completion: compile(&raw.completion)?, question: compile(&raw.question)? })
    }

    /// Ids of every milestone the table can produce.
    pub fn catalog(&self) -> BTreeSet<String> {
        self.rules.iter().map(|r| ExternalMilestone::id_for(r.kind, &r.description)).collect()
    }

    fn completed(&self, sentence: &str) -> bool {
        self.completion.is_match(sentence) && !self.question.is_match(sentence)
    }

    /// `(rule, sentence reports completion)` for every rule matching a sentence of `text`.
    fn mentions<'a>(&'a self, text: &str) -> Vec<(&'a MilestoneRule, bool)> {
        let text = normalize_quotes(text);
        let mut out = Vec::new();
        for sentence in split_sentences(&text) {
            for r in &self.rules {
                if r.pattern.is_match(sentence) {
                    out.push((r, self.completed(sentence)));
                }
            }
        }
        out
    }
}

/// External milestones mentioned in `u` that are neither registered nor in H_Mext.
pub fn extract_milestones(
    rules: &MilestoneRules,
    u: &Utterance,
    history: &ConversationHistory,
    registry: &ExternalRegistry,
) -> Result<Vec<ExternalMilestone>, NluError> {
    if u.speaker != Speaker::User {
        return Err(NluError::NotUserUtterance(u.id.clone()));
    }
    let mut out: Vec<ExternalMilestone> = Vec::new();
    for (rule, done) in rules.mentions(&u.text) {
        let id = ExternalMilestone::id_for(rule.kind, &rule.description);
        if registry.milestones.contains_key(&id) || history.contains_ext(rule.kind, &rule.description) {
            continue;
        }
        match out.iter_mut().find(|m| m.id == id) {
            // A later completed mention in the same turn wins.
            Some(m) => {
                if done && !m.resolved {
                    m.resolved = true;
                    m.source_utterance_id = Some(u.id.clone());
                }
            }
            None => out.push(ExternalMilestone::new(rule.kind, &rule.description, done, done.then(|| u.id.clone()))),
        }
    }
    Ok(out)
}

/// Registered, still unresolved milestones that `u` reports as completed.
pub fn detect_resolutions(rules: &MilestoneRules, u: &Utterance, registry: &ExternalRegistry) -> Vec<String> {
    let mut out = Vec::new();
    for (rule, done) in rules.mentions(&u.text) {
        let id = ExternalMilestone::id_for(rule.kind, &rule.description);
        if done
            && registry.resolution(&id) == Some(false)
            && registry.milestones.contains_key(&id)
            && !out.contains(&id)
        {
            out.push(id);
        }
    }
    out
}

/// Milestones stated by registration answers such as `"work authorization: yes"`.
pub fn registration_milestones(
    rules: &MilestoneRules,
    facts: &BTreeSet<String>,
) -> Result<Vec<ExternalMilestone>, NluError> {
    let mut out: Vec<ExternalMilestone> = Vec::new();
    for fact in facts {
        let (subject, answer) = fact
            .split_once(':')
            .ok_or_else(|| NluError::Invalid(format!("registration fact {fact:?} is not `subject: yes|no`")))?;
        let resolved = match canonical_text(answer).as_str() {
            "yes" | "true" => true,
            "no" | "false" => false,
            other => return Err(NluError::Invalid(format!("registration answer {other:?} is not yes or no"))),
        };
        let subject = normalize_quotes(subject);
        let rule = rules
            .rules
            .iter()
            .find(|r| r.pattern.is_match(&subject))
            .ok_or_else(|| NluError::Invalid(format!("registration fact {fact:?} matches no milestone rule")))?;
        let m = ExternalMilestone::new(
            rule.kind,
            &rule.description,
            resolved,
            resolved.then(|| REGISTRATION_SOURCE.to_string()),
        );
        if !out.iter().any(|x| x.id == m.id) {
            out.push(m);
        }
    }
    Ok(out)
}
