//! Query graphs and the template registry that produces them.
//!
//! A template is looked up for the recognized domain intent, walking up the
//! hierarchy to the nearest ancestor that has one, falling back to the
//! conversational category. Template slots (`"$Location"`) are bound from the
//! highest-priority accumulated entity of that type; unbound slots leave the
//! pattern node as a plain variable.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::Scalar;
use super::KbError;
use crate::model::{Entity, IntentHierarchy, IntentResult};
use crate::text::line_of;

/// `var.attr` reference to a projected attribute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Projection {
    pub var: String,
    pub attr: String,
}

impl Projection {
    pub fn parse(s: &str) -> Result<Self, KbError> {
        match s.split_once('.') {
            Some((var, attr)) if !var.is_empty() && !attr.is_empty() => {
                Ok(Projection { var: var.to_string(), attr: attr.to_string() })
            }
            _ => Err(KbError::Invalid(format!("projection {s:?} is not of the form var.attr"))),
        }
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.var, self.attr)
    }
}

impl Serialize for Projection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Projection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Projection::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrConstraint {
    pub attr: String,
    pub value: Scalar,
    /// Entity type this constraint was bound from, if it came from a slot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternNode {
    pub var: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<AttrConstraint>,
    /// Introduced by an optional edge; may stay unbound in a row.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternEdge {
    pub from: String,
    pub rel: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub optional: bool,
}

/// An optional edge a template allows `Expand` to add.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionalEdgeSpec {
    pub from: String,
    pub rel: String,
    pub to: String,
    pub label: String,
    #[serde(default)]
    pub project: Vec<Projection>,
}

/// Where `Refine` may pin an accumulated entity of the given type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineSpec {
    pub entity: String,
    pub var: String,
    pub attr: String,
}

/// A refinement candidate resolved against the session's entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingRefinement {
    pub entity_type: String,
    pub value: String,
    pub priority: f64,
    pub var: String,
    pub attr: String,
}

/// Entities learned from retrieved facts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeriveSpec {
    pub from: Projection,
    /// Fixed entity type, or ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
    /// ... the entity type read from another projected attribute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_from: Option<Projection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGraph {
    pub template_id: String,
    pub axis: String,
    pub nodes: Vec<PatternNode>,
    pub edges: Vec<PatternEdge>,
    pub projections: Vec<Projection>,
    /// Entity displays available to response rendering, keyed by entity type.
    #[serde(default)]
    pub context: BTreeMap<String, String>,
    #[serde(default)]
    pub optional_pool: Vec<OptionalEdgeSpec>,
    #[serde(default)]
    pub pending_refinements: Vec<PendingRefinement>,
    #[serde(default)]
    pub derive: Vec<DeriveSpec>,
}

impl QueryGraph {
    pub fn node(&self, var: &str) -> Option<&PatternNode> {
        self.nodes.iter().find(|n| n.var == var)
    }

    pub fn required_vars(&self) -> Vec<&str> {
        self.nodes.iter().filter(|n| !n.optional).map(|n| n.var.as_str()).collect()
    }

    /// Checks variable references and connectivity.
    pub fn validate(&self) -> Result<(), KbError> {
        let vars: BTreeSet<&str> = self.nodes.iter().map(|n| n.var.as_str()).collect();
        if vars.len() != self.nodes.len() {
            return Err(KbError::InvalidPattern(format!("{}: duplicate pattern variable", self.template_id)));
        }
        if self.nodes.iter().all(|n| n.optional) {
            return Err(KbError::InvalidPattern(format!("{}: pattern has no required node", self.template_id)));
        }
        for e in &self.edges {
            for v in [&e.from, &e.to] {
                if !vars.contains(v.as_str()) {
                    return Err(KbError::InvalidPattern(format!(
                        "{}: edge references unknown variable {v}",
                        self.template_id
                    )));
                }
            }
            let to_optional = self.node(&e.to).is_some_and(|n| n.optional);
            if e.optional && (!to_optional || self.node(&e.from).is_some_and(|n| n.optional)) {
                return Err(KbError::InvalidPattern(format!(
                    "{}: optional edge must lead from a required node to an optional node",
                    self.template_id
                )));
            }
            if !e.optional && (to_optional || self.node(&e.from).is_some_and(|n| n.optional)) {
                return Err(KbError::InvalidPattern(format!(
                    "{}: required edge touches optional node",
                    self.template_id
                )));
            }
        }
        for p in &self.projections {
            if !vars.contains(p.var.as_str()) {
                return Err(KbError::InvalidPattern(format!(
                    "{}: projection {p} references unknown variable",
                    self.template_id
                )));
            }
        }
        for r in &self.pending_refinements {
            if self.node(&r.var).is_none_or(|n| n.optional) {
                return Err(KbError::InvalidPattern(format!("{}: refinement targets {}", self.template_id, r.var)));
            }
        }
        // connectivity over required edges
        let required: Vec<&str> = self.required_vars();
        let mut seen = BTreeSet::from([required[0]]);
        let mut queue = VecDeque::from([required[0]]);
        while let Some(v) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| !e.optional) {
                let other = if e.from == v {
                    e.to.as_str()
                } else if e.to == v {
                    e.from.as_str()
                } else {
                    continue;
                };
                if seen.insert(other) {
                    queue.push_back(other);
                }
            }
        }
        if seen.len() != required.len() {
            return Err(KbError::InvalidPattern(format!("{}: pattern is not connected", self.template_id)));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Template file

#[derive(Debug, Clone, PartialEq)]
pub enum TemplateValue {
    Literal(Scalar),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateNode {
    pub var: String,
    pub label: Option<String>,
    pub attrs: Vec<(String, TemplateValue)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateTarget {
    Node(String),
    Category(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryTemplate {
    pub id: String,
    pub axis: String,
    pub target: TemplateTarget,
    pub order: u32,
    pub nodes: Vec<TemplateNode>,
    pub edges: Vec<PatternEdge>,
    pub project: Vec<Projection>,
    pub optional: Vec<OptionalEdgeSpec>,
    pub refine: Vec<RefineSpec>,
    pub derive: Vec<DeriveSpec>,
    /// Entity types exposed to rendering besides those bound through slots.
    pub context: Vec<String>,
}

impl QueryTemplate {
    /// Entity types referenced through `$Type` slots.
    pub fn slot_types(&self) -> BTreeSet<String> {
        self.nodes
            .iter()
            .flat_map(|n| n.attrs.iter())
            .filter_map(|(_, v)| match v {
                TemplateValue::Slot(t) => Some(t.clone()),
                _ => None,
            })
            .collect()
    }

    /// Everything a response template for this axis may reference.
    pub fn provided_slots(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.project.iter().map(|p| p.to_string()).collect();
        out.extend(self.optional.iter().flat_map(|o| o.project.iter().map(|p| p.to_string())));
        out.extend(self.slot_types());
        out.extend(self.context.iter().cloned());
        out
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplateFile {
    version: u32,
    #[serde(default, rename = "template")]
    templates: Vec<RawTemplate>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    id: toml::Spanned<String>,
    axis: String,
    node: Option<String>,
    category: Option<String>,
    #[serde(default)]
    order: u32,
    nodes: Vec<RawNode>,
    #[serde(default)]
    edges: Vec<RawEdge>,
    #[serde(default)]
    project: Vec<String>,
    #[serde(default)]
    optional: Vec<RawOptional>,
    #[serde(default)]
    refine: Vec<RefineSpec>,
    #[serde(default)]
    derive: Vec<RawDerive>,
    #[serde(default)]
    context: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    var: String,
    label: Option<String>,
    #[serde(default)]
    attrs: BTreeMap<String, toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    from: String,
    rel: String,
    to: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptional {
    from: String,
    rel: String,
    to: String,
    label: String,
    #[serde(default)]
    project: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDerive {
    from: String,
    entity: Option<String>,
    entity_from: Option<String>,
}

pub const QUERY_TEMPLATE_VERSION: u32 = 1;

/// Registry of query templates keyed by hierarchy node and conversational category.
#[derive(Debug, Clone, Default)]
pub struct QueryTemplates {
    templates: Vec<QueryTemplate>,
}

fn toml_scalar(v: &toml::Value) -> Option<TemplateValue> {
    Some(match v {
        toml::Value::String(s) => match s.strip_prefix('$') {
            Some(slot) => TemplateValue::Slot(slot.to_string()),
            None => TemplateValue::Literal(Scalar::Str(s.clone())),
        },
        toml::Value::Integer(i) => TemplateValue::Literal(Scalar::Int(*i)),
        toml::Value::Float(f) => TemplateValue::Literal(Scalar::Float(*f)),
        toml::Value::Boolean(b) => TemplateValue::Literal(Scalar::Bool(*b)),
        _ => return None,
    })
}

impl QueryTemplates {
    pub fn new(templates: Vec<QueryTemplate>) -> Result<Self, KbError> {
        let mut ids = BTreeSet::new();
        let mut axes = BTreeSet::new();
        for t in &templates {
            if !ids.insert(t.id.clone()) {
                return Err(KbError::Invalid(format!("duplicate template id {}", t.id)));
            }
            if !axes.insert(t.axis.clone()) {
                return Err(KbError::Invalid(format!("axis {} is used by more than one template", t.axis)));
            }
            // Instantiating with no entities exercises every structural check.
            instantiate(t, &[])?.validate()?;
        }
        Ok(Self { templates })
    }

    pub fn parse(text: &str) -> Result<Self, KbError> {
        let raw: RawTemplateFile = toml::from_str(text).map_err(|e| KbError::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        if raw.version != QUERY_TEMPLATE_VERSION {
            return Err(KbError::Parse {
                line: 1,
                message: format!("unsupported template file version {}", raw.version),
            });
        }
        let mut templates = Vec::new();
        for rt in raw.templates {
            let line = line_of(text, rt.id.span().start);
            let at = |message: String| KbError::Parse { line, message };
            let target = match (rt.node, rt.category) {
                (Some(n), None) => TemplateTarget::Node(n),
                (None, Some(c)) => TemplateTarget::Category(c),
                _ => return Err(at(format!("template {} needs exactly one of `node` or `category`", rt.id.get_ref()))),
            };
            let mut nodes = Vec::new();
            for n in rt.nodes {
                let mut attrs = Vec::new();
                for (k, v) in &n.attrs {
                    let tv = toml_scalar(v).ok_or_else(|| at(format!("attribute {k} must be a scalar")))?;
                    attrs.push((k.clone(), tv));
                }
                nodes.push(TemplateNode { var: n.var, label: n.label, attrs });
            }
            let proj = |v: Vec<String>| v.iter().map(|p| Projection::parse(p)).collect::<Result<Vec<_>, _>>();
            let project = proj(rt.project).map_err(|e| at(e.to_string()))?;
            let mut optional = Vec::new();
            for o in rt.optional {
                optional.push(OptionalEdgeSpec {
                    from: o.from,
                    rel: o.rel,
                    to: o.to,
                    label: o.label,
                    project: proj(o.project).map_err(|e| at(e.to_string()))?,
                });
            }
            let mut derive = Vec::new();
            for d in rt.derive {
                if d.entity.is_some() == d.entity_from.is_some() {
                    return Err(at("derive needs exactly one of `entity` or `entity_from`".into()));
                }
                derive.push(DeriveSpec {
                    from: Projection::parse(&d.from).map_err(|e| at(e.to_string()))?,
                    entity: d.entity,
                    entity_from: d
                        .entity_from
                        .map(|p| Projection::parse(&p))
                        .transpose()
                        .map_err(|e| at(e.to_string()))?,
                });
            }
            let t = QueryTemplate {
                id: rt.id.into_inner(),
                axis: rt.axis,
                target,
                order: rt.order,
                nodes,
                edges: rt
                    .edges
                    .into_iter()
                    .map(|e| PatternEdge { from: e.from, rel: e.rel, to: e.to, optional: false })
                    .collect(),
                project,
                optional,
                refine: rt.refine,
                derive,
                context: rt.context,
            };
            instantiate(&t, &[]).and_then(|q| q.validate()).map_err(|e| at(e.to_string()))?;
            templates.push(t);
        }
        Self::new(templates)
    }

    pub fn templates(&self) -> &[QueryTemplate] {
        &self.templates
    }

    pub fn by_axis(&self, axis: &str) -> Option<&QueryTemplate> {
        self.templates.iter().find(|t| t.axis == axis)
    }

    pub fn by_id(&self, id: &str) -> Option<&QueryTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }

    fn for_target(&self, target: &TemplateTarget) -> Vec<&QueryTemplate> {
        let mut v: Vec<_> = self.templates.iter().filter(|t| &t.target == target).collect();
        v.sort_by(|a, b| a.order.cmp(&b.order).then_with(|| a.id.cmp(&b.id)));
        v
    }

    /// Templates serving an intent, in axis order.
    pub fn lookup(&self, intent: &IntentResult, hierarchy: &IntentHierarchy) -> Vec<&QueryTemplate> {
        if let Some(domain) = &intent.domain {
            for node in hierarchy.ancestors_inclusive(domain) {
                let found = self.for_target(&TemplateTarget::Node(node.to_string()));
                if !found.is_empty() {
                    return found;
                }
            }
        }
        self.for_target(&TemplateTarget::Category(intent.conversational.clone()))
    }
}

/// Highest priority first, then most recently referenced, then by value.
fn best_entity<'a>(entities: &'a [Entity], entity_type: &str) -> Option<&'a Entity> {
    entities.iter().filter(|e| e.entity_type == entity_type).min_by(|a, b| {
        b.priority
            .total_cmp(&a.priority)
            .then_with(|| b.last_referenced.cmp(&a.last_referenced))
            .then_with(|| a.value.cmp(&b.value))
    })
}

/// Binds a template against accumulated entities.
pub fn instantiate(t: &QueryTemplate, entities: &[Entity]) -> Result<QueryGraph, KbError> {
    let mut context = BTreeMap::new();
    let mut nodes = Vec::new();
    for n in &t.nodes {
        let mut constraints = Vec::new();
        for (attr, v) in &n.attrs {
            match v {
                TemplateValue::Literal(s) => {
                    constraints.push(AttrConstraint { attr: attr.clone(), value: s.clone(), slot: None })
                }
                TemplateValue::Slot(ty) => {
                    if let Some(e) = best_entity(entities, ty) {
                        context.insert(ty.clone(), e.display.clone());
                        constraints.push(AttrConstraint {
                            attr: attr.clone(),
                            value: Scalar::Str(e.value.canonical_string()),
                            slot: Some(ty.clone()),
                        });
                    }
                }
            }
        }
        nodes.push(PatternNode { var: n.var.clone(), label: n.label.clone(), constraints, optional: false });
    }
    for ty in &t.context {
        if let Some(e) = best_entity(entities, ty) {
            context.insert(ty.clone(), e.display.clone());
        }
    }
    let bound: BTreeSet<&str> =
        nodes.iter().flat_map(|n| n.constraints.iter().filter_map(|c| c.slot.as_deref())).collect();
    let mut pending: Vec<PendingRefinement> = t
        .refine
        .iter()
        .filter(|r| !bound.contains(r.entity.as_str()))
        .filter_map(|r| {
            best_entity(entities, &r.entity).map(|e| PendingRefinement {
                entity_type: r.entity.clone(),
                value: e.value.canonical_string(),
                priority: e.priority,
                var: r.var.clone(),
                attr: r.attr.clone(),
            })
        })
        .collect();
    pending.sort_by(|a, b| b.priority.total_cmp(&a.priority).then_with(|| a.entity_type.cmp(&b.entity_type)));
    Ok(QueryGraph {
        template_id: t.id.clone(),
        axis: t.axis.clone(),
        nodes,
        edges: t.edges.clone(),
        projections: t.project.clone(),
        context,
        optional_pool: t.optional.clone(),
        pending_refinements: pending,
        derive: t.derive.clone(),
    })
}

/// Builds one query graph per axis served by the intent.
pub fn construct_query_graph(
    intent: &IntentResult,
    entities: &[Entity],
    templates: &QueryTemplates,
    hierarchy: &IntentHierarchy,
) -> Result<Vec<QueryGraph>, KbError> {
    let found = templates.lookup(intent, hierarchy);
    if found.is_empty() {
        return Err(KbError::NoTemplate {
            domain: intent.domain.clone(),
            conversational: intent.conversational.clone(),
        });
    }
    found.into_iter().map(|t| instantiate(t, entities)).collect()
}
