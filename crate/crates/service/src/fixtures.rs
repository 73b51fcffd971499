//! Loading fixtures from disk, falling back to the shipped copies.
//!
//! A templates directory holds the text-side fixtures under fixed names:
//! `queries.toml`, `responses.toml`, `lexicon.toml` and `milestones.toml`.

use std::path::{Path, PathBuf};

use mission_core::engine::{Engine, EngineError, FixtureSources};
use mission_core::fixtures;

use crate::ServiceError;

pub const QUERIES_FILE: &str = "queries.toml";
pub const RESPONSES_FILE: &str = "responses.toml";
pub const LEXICON_FILE: &str = "lexicon.toml";
pub const MILESTONES_FILE: &str = "milestones.toml";

/// Fixture locations. Anything left unset uses the shipped fixture.
#[derive(Debug, Clone, Default)]
pub struct FixturePaths {
    pub kb: Option<PathBuf>,
    pub hierarchy: Option<PathBuf>,
    pub machine: Option<PathBuf>,
    pub templates: Option<PathBuf>,
}

struct Loaded {
    text: String,
    path: Option<PathBuf>,
}

fn read(path: Option<PathBuf>, shipped: &str) -> Result<Loaded, ServiceError> {
    match path {
        None => Ok(Loaded { text: shipped.to_string(), path: None }),
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| ServiceError::io(&p, e))?;
            Ok(Loaded { text, path: Some(p) })
        }
    }
}

impl FixturePaths {
    pub fn load(&self) -> Result<Engine, ServiceError> {
        let in_templates = |name: &str| self.templates.as_ref().map(|d| d.join(name));
        let kb = read(self.kb.clone(), fixtures::KB)?;
        let hierarchy = read(self.hierarchy.clone(), fixtures::HIERARCHY)?;
        let machine = read(self.machine.clone(), fixtures::MACHINE)?;
        let queries = read(in_templates(QUERIES_FILE), fixtures::QUERIES)?;
        let responses = read(in_templates(RESPONSES_FILE), fixtures::RESPONSES)?;
        let lexicon = read(in_templates(LEXICON_FILE), fixtures::LEXICON)?;
        let milestones = read(in_templates(MILESTONES_FILE), fixtures::MILESTONE_RULES)?;
        let src = FixtureSources {
            kb: &kb.text,
            hierarchy: &hierarchy.text,
            queries: &queries.text,
            lexicon: &lexicon.text,
            milestone_rules: &milestones.text,
            responses: &responses.text,
            machine: &machine.text,
        };
        Engine::load(&src).map_err(|e| match e {
            EngineError::FixtureLoad { file, message } => {
                let by_name = [
                    ("kb", &kb),
                    ("hierarchy", &hierarchy),
                    ("machine", &machine),
                    ("queries", &queries),
                    ("responses", &responses),
                    ("lexicon", &lexicon),
                    ("milestones", &milestones),
                ];
                let shown = by_name
                    .iter()
                    .find(|(n, _)| *n == file)
                    .and_then(|(_, l)| l.path.as_deref().map(Path::display).map(|d| d.to_string()))
                    .unwrap_or(file);
                ServiceError::Engine(EngineError::FixtureLoad { file: shown, message })
            }
            other => ServiceError::Engine(other),
        })
    }
}
