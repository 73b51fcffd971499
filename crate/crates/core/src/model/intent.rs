//! Domain intent hierarchy and recognized intents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Conversational intent categories shipped by default.
///
/// The first five are the categories the model is built around; the rest are
/// filler categories so the list has the 22 slots the classifier expects.
/// Deployments replace this list through configuration.
pub const DEFAULT_CATEGORIES: [&str; 22] = [
    "factual-question",
    "recommendation-request",
    "opinion",
    "comparison-request",
    "disagreement",
    // fillers
    "agreement",
    "feedback",
    "clarification-answer",
    "information-provision",
    "goal-statement",
    "closing",
    "gratitude",
    "greeting",
    "confirmation-request",
    "elaboration-request",
    "preference-statement",
    "concern",
    "hypothetical",
    "procedural-question",
    "status-update",
    "topic-shift",
    "other",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentNode {
    pub id: String,
    pub label: String,
    pub parent: Option<String>,
}

/// Tree of domain intents addressed by dotted ids ("3.2" is a child of "3").
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentHierarchy {
    pub nodes: BTreeMap<String, IntentNode>,
}

/// Number of components in a dotted id.
pub fn node_depth(id: &str) -> usize {
    id.split('.').count()
}

/// `node` equals `ancestor` or lies in its subtree.
pub fn is_under(node: &str, ancestor: &str) -> bool {
    node == ancestor || (node.starts_with(ancestor) && node.as_bytes().get(ancestor.len()) == Some(&b'.'))
}

fn parent_of(id: &str) -> Option<String> {
    id.rsplit_once('.').map(|(p, _)| p.to_string())
}

impl IntentHierarchy {
    /// Parses the outline format:
    ///
    /// ```text
    /// 1. permits and licenses
    ///  1.1. Obtain a food facility health permit
    /// ```
    ///
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let line_re = regex::Regex::new(r"^\s*(\d+(?:\.\d+)*)\.?\s+(\S.*?)\s*$").expect("outline regex");
        let mut h = IntentHierarchy::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let caps = line_re.captures(raw).ok_or_else(|| ModelError::Parse {
                line,
                message: format!("expected `<dotted id>. <label>`, got {trimmed:?}"),
            })?;
            let id = caps[1].to_string();
            let parent = parent_of(&id);
            if let Some(p) = &parent {
                if !h.nodes.contains_key(p) {
                    return Err(ModelError::Parse {
                        line,
                        message: format!("node {id} appears before its parent {p}"),
                    });
                }
            }
            if h.nodes.contains_key(&id) {
                return Err(ModelError::Parse { line, message: format!("duplicate node id {id}") });
            }
            h.nodes.insert(id.clone(), IntentNode { id, label: caps[2].to_string(), parent });
        }
        if h.nodes.is_empty() {
            return Err(ModelError::Parse { line: 0, message: "hierarchy has no nodes".into() });
        }
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for node in self.nodes.values() {
            if parent_of(&node.id) != node.parent {
                return Err(ModelError::Invalid(format!("node {} has inconsistent parent", node.id)));
            }
            if let Some(p) = &node.parent {
                if !self.nodes.contains_key(p) {
                    return Err(ModelError::DanglingReference(format!("parent {p} of {}", node.id)));
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn roots(&self) -> impl Iterator<Item = &IntentNode> {
        self.nodes.values().filter(|n| n.parent.is_none())
    }

    /// The node itself followed by its ancestors up to the root.
    pub fn ancestors_inclusive<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        let mut cur = self.nodes.get(id).map(|n| n.id.as_str());
        std::iter::from_fn(move || {
            let here = cur?;
            cur = self.nodes.get(here).and_then(|n| n.parent.as_deref());
            Some(here)
        })
    }

    pub fn label(&self, id: &str) -> Option<&str> {
        self.nodes.get(id).map(|n| n.label.as_str())
    }
}

/// Output of intent recognition for one user utterance (an H_I entry).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentResult {
    pub conversational: String,
    pub domain: Option<String>,
    /// Joint score of the selected (conversational, domain) pair.
    pub score: f64,
    pub conversational_score: f64,
    pub domain_score: f64,
    pub timestamp: u64,
    pub utterance_id: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    const OUTLINE: &str =
        "1. permits and licenses\n 1.1. Obtain a food facility health permit\n2. Find a suitable location\n";

    #[test]
    fn parses_outline() {
        let h = IntentHierarchy::parse(OUTLINE).unwrap();
        assert_eq!(h.nodes.len(), 3);
        assert_eq!(h.nodes["1.1"].parent.as_deref(), Some("1"));
        assert_eq!(h.roots().count(), 2);
        assert_eq!(h.ancestors_inclusive("1.1").collect::<Vec<_>>(), vec!["1.1", "1"]);
    }

    #[test]
    fn orphan_reports_line() {
        let err = IntentHierarchy::parse("1. a\n 2.1. orphan\n").unwrap_err();
        assert!(matches!(err, ModelError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn subtree_membership_respects_dots() {
        assert!(is_under("1.1", "1"));
        assert!(is_under("1", "1"));
        assert!(!is_under("11", "1"));
        assert!(!is_under("1", "1.1"));
        assert_eq!(node_depth("4.5"), 2);
    }

    #[test]
    fn default_categories_has_named_five_and_22_total() {
        assert_eq!(DEFAULT_CATEGORIES.len(), 22);
        let unique: std::collections::BTreeSet<_> = DEFAULT_CATEGORIES.iter().collect();
        assert_eq!(unique.len(), 22);
        for c in ["factual-question", "recommendation-request", "opinion", "comparison-request", "disagreement"] {
            assert!(DEFAULT_CATEGORIES.contains(&c));
        }
    }
}
