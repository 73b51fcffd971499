//! Entities extracted from user turns and the prerequisites that consume them.
//!
//! Values are canonicalized on construction: text is case-folded and
//! whitespace-normalized, currency amounts become integer cents, and dollar
//! ranges keep both bounds. `canonical_string` renders a value back into a
//! form that re-parses to the same value, so canonicalization is idempotent.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Default priority assigned to a freshly extracted entity.
pub const INITIAL_ENTITY_PRIORITY: f64 = 0.5;

const AMOUNT: &str = r"\$\s*(\d{1,3}(?:,\d{3})+|\d+)(?:\.(\d{1,2}))?\s*([kK])?";

fn money_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"^{AMOUNT}$")).expect("money regex"))
}

fn range_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let bare = r"\$?\s*(\d{1,3}(?:,\d{3})+|\d+)(?:\.(\d{1,2}))?\s*([kK])?";
        Regex::new(&format!(r"^{AMOUNT}\s*(?:-|–|to)\s*{bare}$")).expect("range regex")
    })
}

fn percent_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d+)(?:\.(\d{1,2}))?\s*%$").expect("percent regex"))
}

/// Parses the three capture groups of an amount (whole, fraction, k-suffix) into cents.
fn amount_to_cents(whole: &str, frac: Option<&str>, kilo: bool) -> Option<i64> {
    let whole: i64 = whole.replace(',', "").parse().ok()?;
    let frac = match frac {
        Some(f) if f.len() == 1 => f.parse::<i64>().ok()? * 10,
        Some(f) => f.parse::<i64>().ok()?,
        None => 0,
    };
    let cents = whole.checked_mul(100)?.checked_add(frac)?;
    if kilo {
        cents.checked_mul(1000)
    } else {
        Some(cents)
    }
}

/// Case-folds, maps typographic apostrophes to ASCII and collapses whitespace.
pub fn canonical_text(raw: &str) -> String {
    raw.replace(['’', '‘'], "'").to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A canonicalized entity value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntityValue {
    Text { value: String },
    Money { cents: i64 },
    MoneyRange { low_cents: i64, high_cents: i64 },
    Percent { basis_points: i64 },
}

impl EntityValue {
    /// Canonicalizes a raw surface string.
    pub fn parse(raw: &str) -> Self {
        let trimmed = raw.trim();
        if let Some(c) = range_re().captures(trimmed) {
            let low = amount_to_cents(&c[1], c.get(2).map(|m| m.as_str()), c.get(3).is_some());
            let high = amount_to_cents(&c[4], c.get(5).map(|m| m.as_str()), c.get(6).is_some());
            if let (Some(low), Some(high)) = (low, high) {
                let (low_cents, high_cents) = if low <= high { (low, high) } else { (high, low) };
                return EntityValue::MoneyRange { low_cents, high_cents };
            }
        }
        if let Some(c) = money_re().captures(trimmed) {
            if let Some(cents) = amount_to_cents(&c[1], c.get(2).map(|m| m.as_str()), c.get(3).is_some()) {
                return EntityValue::Money { cents };
            }
        }
        if let Some(c) = percent_re().captures(trimmed) {
            if let Some(bp) = amount_to_cents(&c[1], c.get(2).map(|m| m.as_str()), false) {
                return EntityValue::Percent { basis_points: bp };
            }
        }
        EntityValue::Text { value: canonical_text(trimmed) }
    }

    /// Renders the value so that `parse(canonical_string())` returns `self`.
    pub fn canonical_string(&self) -> String {
        match self {
            EntityValue::Text { value } => value.clone(),
            EntityValue::Money { cents } => format_cents(*cents),
            EntityValue::MoneyRange { low_cents, high_cents } => {
                format!("{}-{}", format_cents(*low_cents), format_cents(*high_cents))
            }
            EntityValue::Percent { basis_points } => {
                let whole = basis_points / 100;
                let frac = basis_points % 100;
                if frac == 0 {
                    format!("{whole}%")
                } else {
                    format!("{whole}.{frac:02}%")
                }
            }
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            EntityValue::Text { value } => Some(value),
            _ => None,
        }
    }
}

impl fmt::Display for EntityValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_string())
    }
}

/// `12345678` cents renders as `$123,456.78`; whole dollars drop the fraction.
pub fn format_cents(cents: i64) -> String {
    let sign = if cents < 0 { "-" } else { "" };
    let abs = cents.unsigned_abs();
    let dollars = abs / 100;
    let frac = abs % 100;
    let digits = dollars.to_string();
    let mut grouped = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    if frac == 0 {
        format!("{sign}${grouped}")
    } else {
        format!("{sign}${grouped}.{frac:02}")
    }
}

/// Canonicalize-then-render, the string form used for idempotence checks.
pub fn canonicalize(raw: &str) -> String {
    EntityValue::parse(raw).canonical_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityOrigin {
    /// Extracted from the user's words.
    User,
    /// Derived from facts retrieved for the user's turn.
    Knowledge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_type: String,
    pub value: EntityValue,
    /// Human-facing form used when rendering responses.
    pub display: String,
    pub priority: f64,
    pub source_utterance_id: String,
    /// Turn clock of the last user turn whose state referenced this entity.
    pub last_referenced: u64,
}

impl Entity {
    pub fn new(
        entity_type: impl Into<String>,
        raw: &str,
        display: impl Into<String>,
        source_utterance_id: impl Into<String>,
        turn: u64,
    ) -> Self {
        Self {
            entity_type: entity_type.into(),
            value: EntityValue::parse(raw),
            display: display.into(),
            priority: INITIAL_ENTITY_PRIORITY,
            source_utterance_id: source_utterance_id.into(),
            last_referenced: turn,
        }
    }

    pub fn key(&self) -> EntityKey {
        EntityKey { entity_type: self.entity_type.clone(), value: self.value.clone() }
    }
}

/// Identity of an entity: its type plus canonical value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityKey {
    pub entity_type: String,
    pub value: EntityValue,
}

/// One H_E entry: the entities produced for a single user utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySet {
    pub utterance_id: String,
    pub timestamp: u64,
    pub origin: EntityOrigin,
    pub entities: Vec<Entity>,
}

/// A prerequisite of a milestone: an entity type, optionally with a required value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityRequirement {
    pub entity_type: String,
    /// Human-readable name used in clarification questions.
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// Once satisfied, other values of this type count as off-mission.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pinned: bool,
}

impl EntityRequirement {
    pub fn of_type(entity_type: impl Into<String>, label: impl Into<String>) -> Self {
        Self { entity_type: entity_type.into(), label: label.into(), value: None, pinned: false }
    }

    pub fn satisfied_by(&self, entity: &Entity) -> bool {
        if entity.entity_type != self.entity_type {
            return false;
        }
        match &self.value {
            None => true,
            Some(v) => entity.value == EntityValue::parse(v),
        }
    }

    pub fn satisfied_in<'a>(&self, mut entities: impl Iterator<Item = &'a Entity>) -> bool {
        entities.any(|e| self.satisfied_by(e))
    }
}
