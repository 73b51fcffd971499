//! The shipped fixture files, compiled into the binary.

pub const KB: &str = include_str!("../fixtures/kb.graph");
pub const HIERARCHY: &str = include_str!("../fixtures/hierarchy.txt");
pub const QUERIES: &str = include_str!("../fixtures/queries.toml");
pub const LEXICON: &str = include_str!("../fixtures/lexicon.toml");
pub const MILESTONE_RULES: &str = include_str!("../fixtures/milestones.toml");
pub const RESPONSES: &str = include_str!("../fixtures/responses.toml");
pub const MACHINE: &str = include_str!("../fixtures/machine.toml");
