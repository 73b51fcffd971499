//! Scripted personas: a profile plus user turns with per-turn expectations,
//! run against a fresh session to produce a pass/fail report.
//!
//! ```toml
//! version = 1
//! name = "bakery-ideation"
//!
//! [profile]
//! user_id = "maria"
//! education_level = "intermediate"
//! language_proficiency = "high"
//!
//! [[turn]]
//! text = "I'm interested in starting a bakery in San Ysidro."
//! state = "s1"                       # expected state after the turn
//! contains = ["Which aspect"]        # fragments of the system reply
//! flags = []                         # exact drift flags raised
//! status = "active"
//! milestones_added = []              # milestone ids that must be registered
//! ```

use std::collections::BTreeSet;
use std::fmt;

use mission_core::engine::{DriftFlag, Engine, EngineError, SessionStatus, TurnOutcome};
use mission_core::model::{SessionConfig, UserProfile};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const PERSONA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonaTurn {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<BTreeSet<DriftFlag>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<SessionStatus>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub milestones_added: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonaScript {
    pub name: String,
    pub profile: UserProfile,
    pub turns: Vec<PersonaTurn>,
    /// Source line of each turn, for error messages.
    pub turn_lines: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    version: u32,
    name: String,
    profile: UserProfile,
    #[serde(default, rename = "turn")]
    turns: Vec<toml::Spanned<PersonaTurn>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl PersonaScript {
    /// Parses a script. `file` only labels errors.
    pub fn parse(text: &str, file: &str) -> Result<Self, ServiceError> {
        let err = |line: usize, message: String| ServiceError::ScriptParse { file: file.to_string(), line, message };
        let raw: RawScript = toml::from_str(text)
            .map_err(|e| err(e.span().map(|s| line_of(text, s.start)).unwrap_or(0), e.message().to_string()))?;
        if raw.version != PERSONA_VERSION {
            return Err(err(1, format!("unsupported persona version {}", raw.version)));
        }
        if raw.turns.is_empty() {
            return Err(err(1, "a persona needs at least one turn".into()));
        }
        let turn_lines = raw.turns.iter().map(|t| line_of(text, t.span().start)).collect();
        let turns = raw.turns.into_iter().map(toml::Spanned::into_inner).collect();
        Ok(Self { name: raw.name, profile: raw.profile, turns, turn_lines })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Checks that every expected state exists in the engine's machine.
    pub fn validate(&self, engine: &Engine, file: &str) -> Result<(), ServiceError> {
        for (t, line) in self.turns.iter().zip(&self.turn_lines) {
            if let Some(s) = &t.state {
                if !engine.machine.states.contains_key(s) {
                    return Err(ServiceError::ScriptParse {
                        file: file.to_string(),
                        line: *line,
                        message: format!("expected state {s} is not defined"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub turn: usize,
    pub what: String,
    pub expected: String,
    pub actual: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub outcomes: Vec<TurnOutcome>,
    pub final_status: SessionStatus,
    pub final_state: String,
}

impl PersonaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for PersonaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{mark} turn {} {}: expected {}, actual {}", c.turn, c.what, c.expected, c.actual)?;
        }
        let verdict = if self.passed() { "passed" } else { "FAILED" };
        write!(f, "persona {} {verdict}: final state {}, status {}", self.name, self.final_state, self.final_status)
    }
}

fn reply_text(o: &TurnOutcome) -> String {
    o.system_utterances.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" ")
}

fn show_flags(flags: &BTreeSet<DriftFlag>) -> String {
    let names: Vec<String> =
        flags.iter().map(|f| serde_json::to_string(f).unwrap_or_default().trim_matches('"').to_string()).collect();
    format!("[{}]", names.join(", "))
}

fn check_turn(n: usize, t: &PersonaTurn, o: &TurnOutcome, out: &mut Vec<Check>) {
    let mut push = |what: &str, expected: String, actual: String, passed: bool| {
        out.push(Check { turn: n, what: what.to_string(), expected, actual, passed });
    };
    if let Some(s) = &t.state {
        push("state", s.clone(), o.state.clone(), *s == o.state);
    }
    let reply = reply_text(o);
    for frag in &t.contains {
        push("reply contains", format!("{frag:?}"), format!("{reply:?}"), reply.contains(frag.as_str()));
    }
    if let Some(flags) = &t.flags {
        push("flags", show_flags(flags), show_flags(&o.decisions.drift), *flags == o.decisions.drift);
    }
    if let Some(st) = t.status {
        push("status", st.to_string(), o.status.to_string(), st == o.status);
    }
    for m in &t.milestones_added {
        let added = &o.decisions.milestones_added;
        push("milestone added", m.clone(), format!("{added:?}"), added.contains(m));
    }
}

/// Drives a fresh session through the script and checks every expectation.
pub fn run_persona(
    engine: &Engine,
    script: &PersonaScript,
    config: SessionConfig,
) -> Result<PersonaReport, ServiceError> {
    let id: String = script.name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '-' }).collect();
    let mut session = engine.create_session(&id, script.profile.clone(), config)?;
    let mut checks = Vec::new();
    let mut outcomes = Vec::new();
    for (i, t) in script.turns.iter().enumerate() {
        let n = i + 1;
        match engine.step(&mut session, &t.text) {
            Ok(o) => {
                check_turn(n, t, &o, &mut checks);
                outcomes.push(o);
            }
            Err(e @ (EngineError::SessionNotActive(_) | EngineError::EmptyUtterance)) => {
                checks.push(Check {
                    turn: n,
                    what: "turn accepted".into(),
                    expected: "accepted".into(),
                    actual: e.to_string(),
                    passed: false,
                });
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(PersonaReport {
        name: script.name.clone(),
        checks,
        outcomes,
        final_status: session.status,
        final_state: session.state.id.clone(),
    })
}
