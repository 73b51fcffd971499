//! Random knowledge graphs and query patterns, with a brute-force matcher
//! that shares no code with the library's.

use std::collections::{BTreeMap, BTreeSet};

use mission_core::kb::*;
use rand::seq::SliceRandom;
use rand::Rng;

const LABELS: [&str; 4] = ["A", "B", "C", "D"];
const RELATIONS: [&str; 3] = ["r", "s", "t"];
const KINDS: [&str; 3] = ["x", "y", "z"];

/// Every label and relation occurs at least once, so any generated pattern
/// fits the schema.
pub fn random_kb(rng: &mut impl Rng, max_nodes: usize) -> KnowledgeGraph {
    let n = rng.gen_range(LABELS.len()..=max_nodes.max(LABELS.len()));
    let nodes: Vec<KgNode> = (0..n)
        .map(|i| {
            let mut attrs = BTreeMap::new();
            attrs.insert("kind".to_string(), Scalar::Str(KINDS.choose(rng).unwrap().to_string()));
            if rng.gen_bool(0.7) {
                attrs.insert("size".to_string(), Scalar::Int(rng.gen_range(0..3)));
            }
            let label = if i < LABELS.len() { LABELS[i] } else { LABELS.choose(rng).unwrap() };
            KgNode { id: format!("n{i:03}"), label: label.to_string(), attrs }
        })
        .collect();
    let m = rng.gen_range(0..=n * 3);
    let edges = (0..m + RELATIONS.len())
        .map(|i| KgEdge {
            source: format!("n{:03}", rng.gen_range(0..n)),
            relation: RELATIONS.get(i).unwrap_or_else(|| RELATIONS.choose(rng).unwrap()).to_string(),
            target: format!("n{:03}", rng.gen_range(0..n)),
        })
        .collect();
    KnowledgeGraph::new(nodes, edges).unwrap()
}

fn random_node(rng: &mut impl Rng, var: String, optional: bool) -> PatternNode {
    let label = rng.gen_bool(0.7).then(|| LABELS.choose(rng).unwrap().to_string());
    let mut constraints = Vec::new();
    if rng.gen_bool(0.4) {
        constraints.push(AttrConstraint {
            attr: "kind".into(),
            value: Scalar::Str(KINDS.choose(rng).unwrap().to_string()),
            slot: None,
        });
    }
    if rng.gen_bool(0.2) {
        constraints.push(AttrConstraint { attr: "size".into(), value: Scalar::Int(rng.gen_range(0..3)), slot: None });
    }
    PatternNode { var, label, constraints, optional }
}

/// A connected pattern of up to `max_nodes` nodes: each required node after
/// the first hangs off an earlier one; an optional leaf may follow.
pub fn random_query(rng: &mut impl Rng, max_nodes: usize) -> QueryGraph {
    let total = rng.gen_range(1..=max_nodes);
    let optional = total > 1 && rng.gen_bool(0.3);
    let required = if optional { total - 1 } else { total };
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for i in 0..total {
        let is_opt = i >= required;
        nodes.push(random_node(rng, format!("v{i}"), is_opt));
        if i > 0 {
            let j = rng.gen_range(0..i.min(required));
            let rel = RELATIONS.choose(rng).unwrap().to_string();
            let (from, to) = if is_opt || rng.gen_bool(0.5) {
                (format!("v{j}"), format!("v{i}"))
            } else {
                (format!("v{i}"), format!("v{j}"))
            };
            edges.push(PatternEdge { from, rel, to, optional: is_opt });
        }
    }
    let projections = nodes.iter().map(|n| Projection::parse(&format!("{}.kind", n.var)).unwrap()).collect();
    QueryGraph {
        template_id: "random".into(),
        axis: "random".into(),
        nodes,
        edges,
        projections,
        context: BTreeMap::new(),
        optional_pool: vec![],
        pending_refinements: vec![],
        derive: vec![],
    }
}

fn fits(node: &KgNode, p: &PatternNode) -> bool {
    p.label.as_ref().is_none_or(|l| *l == node.label)
        && p.constraints.iter().all(|c| node.attrs.get(&c.attr).is_some_and(|v| v.matches(&c.value)))
}

/// Every match by exhaustive enumeration, as variable tuples in declaration order.
pub fn brute_force(q: &QueryGraph, k: &KnowledgeGraph) -> Vec<Vec<Option<String>>> {
    let edges: BTreeSet<(String, String, String)> =
        k.edges().map(|e| (e.source.clone(), e.relation.clone(), e.target.clone())).collect();
    let all: Vec<&KgNode> = k.nodes().collect();
    let required: Vec<&PatternNode> = q.nodes.iter().filter(|n| !n.optional).collect();
    let holds = |a: &BTreeMap<String, String>, e: &PatternEdge| match (a.get(&e.from), a.get(&e.to)) {
        (Some(s), Some(t)) => edges.contains(&(s.clone(), e.rel.clone(), t.clone())),
        _ => true,
    };
    let mut partial: Vec<BTreeMap<String, String>> = vec![BTreeMap::new()];
    for p in &required {
        let mut next = Vec::new();
        for a in &partial {
            for n in all.iter().filter(|n| fits(n, p)) {
                let mut b = a.clone();
                b.insert(p.var.clone(), n.id.clone());
                if q.edges.iter().filter(|e| !e.optional).all(|e| holds(&b, e)) {
                    next.push(b);
                }
            }
        }
        partial = next;
    }
    for e in q.edges.iter().filter(|e| e.optional) {
        let target = q.nodes.iter().find(|n| n.var == e.to).unwrap();
        let mut next = Vec::new();
        for a in partial {
            let hits: Vec<&&KgNode> = all
                .iter()
                .filter(|n| fits(n, target) && edges.contains(&(a[&e.from].clone(), e.rel.clone(), n.id.clone())))
                .collect();
            if hits.is_empty() {
                next.push(a.clone());
            }
            for n in hits {
                let mut b = a.clone();
                b.insert(e.to.clone(), n.id.clone());
                next.push(b);
            }
        }
        partial = next;
    }
    let rows: BTreeSet<Vec<Option<String>>> =
        partial.iter().map(|a| q.nodes.iter().map(|n| a.get(&n.var).cloned()).collect()).collect();
    rows.into_iter().collect()
}

/// The library's rows in the same shape.
pub fn library_rows(q: &QueryGraph, f: &FactSet) -> Vec<Vec<Option<String>>> {
    f.rows.iter().map(|r| q.nodes.iter().map(|n| r.bindings.get(&n.var).cloned()).collect()).collect()
}
