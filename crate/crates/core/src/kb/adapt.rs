//! Query adaptation: `Expand` widens a query, `Refine` narrows it.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::graph::Scalar;
use super::query::{AttrConstraint, PatternEdge, PatternNode, QueryGraph};
use super::KbError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptDecision {
    Expand,
    Refine,
    NoChange,
}

/// Applies `decision` to a copy of `q`.
///
/// `Expand` drops the equality constraints of the constrained node farthest
/// from the first pattern node (ties go to the later one) and attaches the
/// first usable optional edge from the template pool. `Refine` pins the
/// highest-priority pending entity onto its node.
pub fn adapt_query(q: &QueryGraph, decision: AdaptDecision) -> Result<QueryGraph, KbError> {
    let mut out = q.clone();
    match decision {
        AdaptDecision::NoChange => {}
        AdaptDecision::Expand => {
            let dist = distances(q);
            let target = q
                .nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| !n.optional && !n.constraints.is_empty())
                .max_by_key(|(i, n)| (dist.get(n.var.as_str()).copied().unwrap_or(0), *i))
                .map(|(i, _)| i)
                .ok_or(KbError::NothingToExpand)?;
            out.nodes[target].constraints.clear();
            let usable =
                out.optional_pool.iter().position(|s| out.node(&s.from).is_some() && out.node(&s.to).is_none());
            if let Some(i) = usable {
                let spec = out.optional_pool.remove(i);
                out.nodes.push(PatternNode {
                    var: spec.to.clone(),
                    label: Some(spec.label),
                    constraints: vec![],
                    optional: true,
                });
                out.edges.push(PatternEdge { from: spec.from, rel: spec.rel, to: spec.to, optional: true });
                out.projections.extend(spec.project);
            }
        }
        AdaptDecision::Refine => {
            if out.pending_refinements.is_empty() {
                return Err(KbError::NothingToRefine);
            }
            let r = out.pending_refinements.remove(0);
            let node = out
                .nodes
                .iter_mut()
                .find(|n| n.var == r.var)
                .ok_or_else(|| KbError::InvalidPattern(format!("refinement targets unknown variable {}", r.var)))?;
            node.constraints.push(AttrConstraint {
                attr: r.attr,
                value: Scalar::Str(r.value),
                slot: Some(r.entity_type),
            });
        }
    }
    out.validate()?;
    Ok(out)
}

/// Undirected hop distance of every required variable from the first node.
fn distances(q: &QueryGraph) -> BTreeMap<&str, usize> {
    let mut dist = BTreeMap::new();
    let Some(first) = q.nodes.first() else { return dist };
    dist.insert(first.var.as_str(), 0);
    let mut queue = VecDeque::from([first.var.as_str()]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        for e in q.edges.iter().filter(|e| !e.optional) {
            let other = if e.from == v {
                e.to.as_str()
            } else if e.to == v {
                e.from.as_str()
            } else {
                continue;
            };
            if !dist.contains_key(other) {
                dist.insert(other, d + 1);
                queue.push_back(other);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::query::{OptionalEdgeSpec, PendingRefinement, Projection};

    fn query() -> QueryGraph {
        let eq = |attr: &str, v: &str| AttrConstraint { attr: attr.into(), value: v.into(), slot: None };
        QueryGraph {
            template_id: "t".into(),
            axis: "a".into(),
            nodes: vec![
                PatternNode {
                    var: "r".into(),
                    label: Some("Region".into()),
                    constraints: vec![eq("name", "x")],
                    optional: false,
                },
                PatternNode {
                    var: "p".into(),
                    label: Some("Product".into()),
                    constraints: vec![eq("kind", "y")],
                    optional: false,
                },
            ],
            edges: vec![PatternEdge { from: "r".into(), rel: "sells".into(), to: "p".into(), optional: false }],
            projections: vec![Projection::parse("p.kind").unwrap()],
            context: BTreeMap::new(),
            optional_pool: vec![OptionalEdgeSpec {
                from: "r".into(),
                rel: "borders".into(),
                to: "n".into(),
                label: "Region".into(),
                project: vec![Projection::parse("n.name").unwrap()],
            }],
            pending_refinements: vec![PendingRefinement {
                entity_type: "Pricing".into(),
                value: "low".into(),
                priority: 0.9,
                var: "p".into(),
                attr: "price_band".into(),
            }],
            derive: vec![],
        }
    }

    #[test]
    fn expand_relaxes_farthest_node_and_adds_optional_edge() {
        let e = adapt_query(&query(), AdaptDecision::Expand).unwrap();
        assert!(e.nodes[1].constraints.is_empty());
        assert_eq!(e.nodes[0].constraints.len(), 1);
        assert!(e.edges.iter().any(|x| x.optional && x.rel == "borders"));
        assert!(e.optional_pool.is_empty());
    }

    #[test]
    fn expand_without_constraints_fails() {
        let mut q = query();
        q.nodes.iter_mut().for_each(|n| n.constraints.clear());
        assert_eq!(adapt_query(&q, AdaptDecision::Expand), Err(KbError::NothingToExpand));
    }

    #[test]
    fn refine_pins_pending_entity() {
        let r = adapt_query(&query(), AdaptDecision::Refine).unwrap();
        assert_eq!(r.nodes[1].constraints.len(), 2);
        assert!(r.pending_refinements.is_empty());
        assert_eq!(adapt_query(&r, AdaptDecision::Refine), Err(KbError::NothingToRefine));
    }

    #[test]
    fn no_change_is_identical() {
        let q = query();
        assert_eq!(adapt_query(&q, AdaptDecision::NoChange).unwrap(), q);
    }
}
