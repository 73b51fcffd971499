//! Exhaustive pattern matching of a query graph against the knowledge graph.
//!
//! Matching is homomorphic: two pattern variables may bind the same node.
//! Required variables are bound by backtracking, seeded from the most
//! constrained node and extended along pattern edges. Optional edges are then
//! applied as left joins in declaration order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::graph::{edge_id, KgNode, KnowledgeGraph, Scalar};
use super::query::{PatternEdge, PatternNode, QueryGraph};
use super::KbError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactRow {
    /// Variable to node id; optional variables without a match are absent.
    pub bindings: BTreeMap<String, String>,
    /// `var.attr` to value for every projection whose node has the attribute.
    pub values: BTreeMap<String, Scalar>,
    /// Node and edge ids the row was built from.
    pub provenance: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactSet {
    pub axis: String,
    pub template_id: String,
    pub rows: Vec<FactRow>,
    /// Entity displays bound into the query, for rendering.
    #[serde(default)]
    pub context: BTreeMap<String, String>,
}

impl FactSet {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct values of a projection in row order.
    pub fn values_of(&self, projection: &str) -> Vec<&Scalar> {
        let mut out: Vec<&Scalar> = Vec::new();
        for row in &self.rows {
            if let Some(v) = row.values.get(projection) {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

pub(crate) fn node_satisfies(node: &KgNode, pattern: &PatternNode) -> bool {
    if let Some(label) = &pattern.label {
        if &node.label != label {
            return false;
        }
    }
    pattern.constraints.iter().all(|c| node.attrs.get(&c.attr).is_some_and(|v| v.matches(&c.value)))
}

/// Rejects labels and relations the graph has never seen.
pub fn check_schema(q: &QueryGraph, k: &KnowledgeGraph) -> Result<(), KbError> {
    for n in &q.nodes {
        if let Some(label) = &n.label {
            if !k.has_label(label) {
                return Err(KbError::SchemaMismatch(format!("unknown node label {label}")));
            }
        }
    }
    for e in &q.edges {
        if !k.has_relation(&e.rel) {
            return Err(KbError::SchemaMismatch(format!("unknown relation {}", e.rel)));
        }
    }
    Ok(())
}

/// Returns every match of `q` in `k`, rows sorted by their bound node ids.
pub fn retrieve_facts(q: &QueryGraph, k: &KnowledgeGraph) -> Result<FactSet, KbError> {
    q.validate()?;
    check_schema(q, k)?;
    let required: Vec<&PatternNode> = q.nodes.iter().filter(|n| !n.optional).collect();
    let required_edges: Vec<&PatternEdge> = q.edges.iter().filter(|e| !e.optional).collect();
    let order = match_order(&required, &required_edges);

    let mut assignments: Vec<BTreeMap<String, String>> = Vec::new();
    let mut current = BTreeMap::new();
    extend(&order, 0, &required, &required_edges, k, &mut current, &mut assignments);

    for e in q.edges.iter().filter(|e| e.optional) {
        let target = q.node(&e.to).expect("validated");
        let mut next = Vec::new();
        for a in assignments {
            let src = &a[&e.from];
            let mut matched = false;
            for (rel, dst) in k.outgoing(src) {
                if rel == &e.rel && k.node(dst).is_some_and(|n| node_satisfies(n, target)) {
                    let mut b = a.clone();
                    b.insert(e.to.clone(), dst.clone());
                    next.push(b);
                    matched = true;
                }
            }
            if !matched {
                next.push(a);
            }
        }
        assignments = next;
    }

    let vars: Vec<&str> = q.nodes.iter().map(|n| n.var.as_str()).collect();
    let sort_key =
        |b: &BTreeMap<String, String>| -> Vec<Option<String>> { vars.iter().map(|v| b.get(*v).cloned()).collect() };
    assignments.sort_by_key(sort_key);
    assignments.dedup();

    let rows = assignments.into_iter().map(|bindings| build_row(q, k, bindings)).collect();
    Ok(FactSet { axis: q.axis.clone(), template_id: q.template_id.clone(), rows, context: q.context.clone() })
}

fn build_row(q: &QueryGraph, k: &KnowledgeGraph, bindings: BTreeMap<String, String>) -> FactRow {
    let mut values = BTreeMap::new();
    let mut projections = q.projections.clone();
    for spec in &q.optional_pool {
        if q.node(&spec.to).is_some() {
            projections.extend(spec.project.iter().cloned());
        }
    }
    for p in &projections {
        if let Some(v) = bindings.get(&p.var).and_then(|id| k.node(id)).and_then(|n| n.attrs.get(&p.attr)) {
            values.insert(p.to_string(), v.clone());
        }
    }
    let mut provenance: BTreeSet<String> = bindings.values().cloned().collect();
    for e in &q.edges {
        if let (Some(s), Some(t)) = (bindings.get(&e.from), bindings.get(&e.to)) {
            provenance.insert(edge_id(s, &e.rel, t));
        }
    }
    FactRow { bindings, values, provenance }
}

/// Most-constrained node first, then neighbours of already-ordered nodes.
fn match_order(nodes: &[&PatternNode], edges: &[&PatternEdge]) -> Vec<usize> {
    let weight = |n: &PatternNode| n.constraints.len() * 2 + usize::from(n.label.is_some());
    let mut order = Vec::with_capacity(nodes.len());
    let mut placed = vec![false; nodes.len()];
    while order.len() < nodes.len() {
        let connected = |i: usize| {
            order.is_empty()
                || edges.iter().any(|e| {
                    let (a, b) = (&e.from, &e.to);
                    (a == &nodes[i].var && order.iter().any(|&j: &usize| &nodes[j].var == b))
                        || (b == &nodes[i].var && order.iter().any(|&j: &usize| &nodes[j].var == a))
                })
        };
        let next = (0..nodes.len())
            .filter(|&i| !placed[i] && connected(i))
            .max_by(|&a, &b| weight(nodes[a]).cmp(&weight(nodes[b])).then(b.cmp(&a)))
            .expect("pattern is connected");
        placed[next] = true;
        order.push(next);
    }
    order
}

fn extend(
    order: &[usize],
    depth: usize,
    nodes: &[&PatternNode],
    edges: &[&PatternEdge],
    k: &KnowledgeGraph,
    current: &mut BTreeMap<String, String>,
    out: &mut Vec<BTreeMap<String, String>>,
) {
    if depth == order.len() {
        out.push(current.clone());
        return;
    }
    let pattern = nodes[order[depth]];
    let candidates = candidates_for(pattern, edges, k, current);
    for id in candidates {
        let node = k.node(&id).expect("indexed node");
        if !node_satisfies(node, pattern) {
            continue;
        }
        let consistent = edges.iter().all(|e| {
            let s = if e.from == pattern.var { Some(&id) } else { current.get(&e.from) };
            let t = if e.to == pattern.var { Some(&id) } else { current.get(&e.to) };
            match (s, t) {
                (Some(s), Some(t)) if e.from == pattern.var || e.to == pattern.var => k.has_edge(s, &e.rel, t),
                _ => true,
            }
        });
        if consistent {
            current.insert(pattern.var.clone(), id);
            extend(order, depth + 1, nodes, edges, k, current, out);
            current.remove(&pattern.var);
        }
    }
}

/// Candidate node ids for `pattern` given the variables bound so far.
fn candidates_for(
    pattern: &PatternNode,
    edges: &[&PatternEdge],
    k: &KnowledgeGraph,
    current: &BTreeMap<String, String>,
) -> Vec<String> {
    for e in edges {
        if e.to == pattern.var {
            if let Some(src) = current.get(&e.from) {
                return neighbours(k.outgoing(src), &e.rel);
            }
        }
        if e.from == pattern.var {
            if let Some(dst) = current.get(&e.to) {
                return neighbours(k.incoming(dst), &e.rel);
            }
        }
    }
    match &pattern.label {
        Some(label) => k.with_label(label).to_vec(),
        None => k.all_ids().cloned().collect(),
    }
}

fn neighbours(adj: &[(String, String)], rel: &str) -> Vec<String> {
    let set: BTreeSet<&String> = adj.iter().filter(|(r, _)| r == rel).map(|(_, n)| n).collect();
    set.into_iter().cloned().collect()
}
