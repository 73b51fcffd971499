#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use mission_core::engine::{Engine, TurnOutcome};
use mission_core::model::{EducationLevel, LanguageProficiency, UserProfile};
use mission_service::persona::PersonaScript;

pub fn engine() -> Arc<Engine> {
    static E: OnceLock<Arc<Engine>> = OnceLock::new();
    E.get_or_init(|| Arc::new(Engine::shipped().unwrap())).clone()
}

pub fn profile() -> UserProfile {
    UserProfile {
        user_id: "owner".into(),
        education_level: EducationLevel::Intermediate,
        language_proficiency: LanguageProficiency::High,
        registration_facts: Default::default(),
    }
}

pub fn persona_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("personas").join(format!("{name}.toml"))
}

pub fn persona(name: &str) -> PersonaScript {
    PersonaScript::load(&persona_path(name)).unwrap()
}

pub fn persona_texts(name: &str) -> Vec<String> {
    persona(name).turns.into_iter().map(|t| t.text).collect()
}

pub fn serialize(outcomes: &[TurnOutcome]) -> Vec<String> {
    outcomes.iter().map(|o| serde_json::to_string(o).unwrap()).collect()
}
