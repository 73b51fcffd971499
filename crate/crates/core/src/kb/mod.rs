//! Embedded property-graph knowledge base: storage, query templates,
//! pattern matching and query adaptation.

mod adapt;
mod graph;
mod matcher;
mod query;
mod readiness;

pub use adapt::{adapt_query, AdaptDecision};
pub use graph::{edge_id, KgEdge, KgNode, KnowledgeGraph, Scalar};
pub use matcher::{check_schema, retrieve_facts, FactRow, FactSet};
pub use query::{
    construct_query_graph, instantiate, AttrConstraint, DeriveSpec, OptionalEdgeSpec, PatternEdge, PatternNode,
    PendingRefinement, Projection, QueryGraph, QueryTemplate, QueryTemplates, RefineSpec, TemplateNode, TemplateTarget,
    TemplateValue,
};
pub use readiness::{choose_adaptation, estimate_readiness};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KbError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid knowledge base: {0}")]
    Invalid(String),
    #[error("invalid query pattern: {0}")]
    InvalidPattern(String),
    #[error("no query template for domain {domain:?} / {conversational}")]
    NoTemplate { domain: Option<String>, conversational: String },
    #[error("query does not fit the graph schema: {0}")]
    SchemaMismatch(String),
    #[error("query has no equality constraint to relax")]
    NothingToExpand,
    #[error("query has no pending refinement")]
    NothingToRefine,
}
