//! In-memory property graph and its line-oriented file format.
//!
//! ```text
//! # comment
//! node region:san_ysidro Region name="San Ysidro" county="San Diego County"
//! edge region:san_ysidro has_demographics demo:san_ysidro
//! ```
//!
//! Attribute values are quoted strings, `true`/`false`, integers, floats, or
//! bare words.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::KbError;
use crate::model::canonical_text;

/// Attribute value of a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Scalar {
    /// Equality used by pattern constraints: strings compare after case folding.
    pub fn matches(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::Str(a), Scalar::Str(b)) => canonical_text(a) == canonical_text(b),
            (Scalar::Int(a), Scalar::Int(b)) => a == b,
            (Scalar::Float(a), Scalar::Float(b)) => a == b,
            (Scalar::Int(a), Scalar::Float(b)) | (Scalar::Float(b), Scalar::Int(a)) => (*a as f64) == *b,
            (Scalar::Bool(a), Scalar::Bool(b)) => a == b,
            _ => false,
        }
    }

    fn parse_token(token: &str, quoted: bool) -> Scalar {
        if quoted {
            return Scalar::Str(token.to_string());
        }
        match token {
            "true" => Scalar::Bool(true),
            "false" => Scalar::Bool(false),
            _ => {
                if let Ok(i) = token.parse::<i64>() {
                    Scalar::Int(i)
                } else if let Ok(f) = token.parse::<f64>() {
                    Scalar::Float(f)
                } else {
                    Scalar::Str(token.to_string())
                }
            }
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Float(x) => write!(f, "{x}"),
            Scalar::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Str(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgNode {
    pub id: String,
    pub label: String,
    pub attrs: BTreeMap<String, Scalar>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KgEdge {
    pub source: String,
    pub relation: String,
    pub target: String,
}

impl KgEdge {
    pub fn id(&self) -> String {
        edge_id(&self.source, &self.relation, &self.target)
    }
}

pub fn edge_id(source: &str, relation: &str, target: &str) -> String {
    format!("{source}-[{relation}]->{target}")
}

/// Immutable property graph with adjacency and label indexes.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<String, KgNode>,
    edges: BTreeSet<KgEdge>,
    by_label: BTreeMap<String, Vec<String>>,
    out: BTreeMap<String, Vec<(String, String)>>,
    inc: BTreeMap<String, Vec<(String, String)>>,
    relations: BTreeSet<String>,
}

impl KnowledgeGraph {
    pub fn new(nodes: Vec<KgNode>, edges: Vec<KgEdge>) -> Result<Self, KbError> {
        let mut g = KnowledgeGraph::default();
        for n in nodes {
            if n.attrs.keys().any(|k| k.is_empty()) {
                return Err(KbError::Invalid(format!("node {} has an empty attribute key", n.id)));
            }
            if g.nodes.contains_key(&n.id) {
                return Err(KbError::Invalid(format!("duplicate node id {}", n.id)));
            }
            g.by_label.entry(n.label.clone()).or_default().push(n.id.clone());
            g.nodes.insert(n.id.clone(), n);
        }
        for e in edges {
            for end in [&e.source, &e.target] {
                if !g.nodes.contains_key(end) {
                    return Err(KbError::Invalid(format!("edge {} references unknown node {end}", e.id())));
                }
            }
            g.insert_edge(e);
        }
        g.sort_indexes();
        Ok(g)
    }

    fn insert_edge(&mut self, e: KgEdge) {
        if self.edges.contains(&e) {
            return;
        }
        self.relations.insert(e.relation.clone());
        self.out.entry(e.source.clone()).or_default().push((e.relation.clone(), e.target.clone()));
        self.inc.entry(e.target.clone()).or_default().push((e.relation.clone(), e.source.clone()));
        self.edges.insert(e);
    }

    fn sort_indexes(&mut self) {
        for v in self.by_label.values_mut() {
            v.sort();
        }
        for v in self.out.values_mut().chain(self.inc.values_mut()) {
            v.sort();
        }
    }

    /// Parses the line format; errors carry the 1-based line number.
    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let mut seen = BTreeMap::new();
        let mut edge_lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let tokens = tokenize(trimmed).map_err(|message| KbError::Parse { line, message })?;
            match tokens.first().map(|(t, _)| t.as_str()) {
                Some("node") => {
                    if tokens.len() < 3 {
                        return Err(KbError::Parse {
                            line,
                            message: "expected `node <id> <Label> [key=value ...]`".into(),
                        });
                    }
                    let id = tokens[1].0.clone();
                    if seen.insert(id.clone(), line).is_some() {
                        return Err(KbError::Parse { line, message: format!("duplicate node id {id}") });
                    }
                    let mut attrs = BTreeMap::new();
                    for (tok, quoted) in &tokens[3..] {
                        let (key, value) = tok.split_once('=').ok_or_else(|| KbError::Parse {
                            line,
                            message: format!("expected key=value, got {tok:?}"),
                        })?;
                        if key.is_empty() {
                            return Err(KbError::Parse { line, message: "empty attribute key".into() });
                        }
                        attrs.insert(key.to_string(), Scalar::parse_token(value, *quoted));
                    }
                    nodes.push(KgNode { id, label: tokens[2].0.clone(), attrs });
                }
                Some("edge") => {
                    if tokens.len() != 4 {
                        return Err(KbError::Parse { line, message: "expected `edge <src> <relation> <dst>`".into() });
                    }
                    edge_lines.push(line);
                    edges.push(KgEdge {
                        source: tokens[1].0.clone(),
                        relation: tokens[2].0.clone(),
                        target: tokens[3].0.clone(),
                    });
                }
                Some(other) => {
                    return Err(KbError::Parse { line, message: format!("unknown record type {other:?}") });
                }
                None => unreachable!("non-empty line has a token"),
            }
        }
        for (e, line) in edges.iter().zip(&edge_lines) {
            for end in [&e.source, &e.target] {
                if !seen.contains_key(end) {
                    return Err(KbError::Parse { line: *line, message: format!("edge references unknown node {end}") });
                }
            }
        }
        Self::new(nodes, edges)
    }

    pub fn node(&self, id: &str) -> Option<&KgNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &KgNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &KgEdge> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn has_edge(&self, source: &str, relation: &str, target: &str) -> bool {
        // BTreeSet lookup needs an owned key; edges are small strings.
        self.edges.contains(&KgEdge {
            source: source.to_string(),
            relation: relation.to_string(),
            target: target.to_string(),
        })
    }

    pub fn with_label(&self, label: &str) -> &[String] {
        self.by_label.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_ids(&self) -> impl Iterator<Item = &String> {
        self.nodes.keys()
    }

    pub fn outgoing(&self, id: &str) -> &[(String, String)] {
        self.out.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn incoming(&self, id: &str) -> &[(String, String)] {
        self.inc.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.by_label.contains_key(label)
    }

    pub fn has_relation(&self, relation: &str) -> bool {
        self.relations.contains(relation)
    }
}

/// Splits on whitespace, keeping `"..."` segments (with `\"` escapes) together.
/// Each token carries whether its value part was quoted.
fn tokenize(line: &str) -> Result<Vec<(String, bool)>, String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut in_quotes = false;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' if in_quotes => in_quotes = false,
            '"' => {
                in_quotes = true;
                quoted = true;
            }
            '\\' if in_quotes => match chars.next() {
                Some(n) => cur.push(n),
                None => return Err("dangling escape".into()),
            },
            c if c.is_whitespace() && !in_quotes => {
                if !cur.is_empty() || quoted {
                    tokens.push((std::mem::take(&mut cur), quoted));
                }
                quoted = false;
            }
            c => cur.push(c),
        }
    }
    if in_quotes {
        return Err("unterminated quote".into());
    }
    if !cur.is_empty() || quoted {
        tokens.push((cur, quoted));
    }
    Ok(tokens)
}
