use std::sync::Arc;

use mission_core::engine::Session;
use mission_core::model::SessionConfig;
use mission_service::store::{SnapshotStore, SESSIONS_DIR};
use mission_service::{ServiceError, SessionService};

mod support;
use support::*;

fn persistent(dir: &std::path::Path) -> SessionService {
    SessionService::persistent(engine(), SessionConfig::default(), SnapshotStore::open(dir).unwrap())
}

fn reference(texts: &[String]) -> Vec<String> {
    let (_, outs) = engine().replay("fig", profile(), SessionConfig::default(), texts).unwrap();
    serialize(&outs)
}

#[test]
fn reload_after_any_turn_continues_identically() {
    let texts = persona_texts("bakery-ideation");
    let want = reference(&texts);
    for cut in 0..=texts.len() {
        let dir = tempfile::tempdir().unwrap();
        let mut got = Vec::new();
        {
            let first = persistent(dir.path());
            first.create_session_with_id("fig", profile(), None).unwrap();
            for t in &texts[..cut] {
                got.push(first.post_utterance("fig", t).unwrap());
            }
        }
        let second = persistent(dir.path());
        for t in &texts[cut..] {
            got.push(second.post_utterance("fig", t).unwrap());
        }
        assert_eq!(serialize(&got), want, "cut after turn {cut}");
    }
}

#[test]
fn snapshot_is_written_before_the_turn_is_acknowledged() {
    let dir = tempfile::tempdir().unwrap();
    let svc = persistent(dir.path());
    svc.create_session_with_id("w", profile(), None).unwrap();
    let out = svc.post_utterance("w", &persona_texts("bakery-ideation")[0]).unwrap();
    let text = std::fs::read_to_string(dir.path().join(SESSIONS_DIR).join("w.json")).unwrap();
    let on_disk = Session::from_json(&text).unwrap();
    assert_eq!(on_disk.clock, out.clock);
    assert_eq!(on_disk, svc.session("w").unwrap());
}

#[test]
fn failed_write_leaves_the_session_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let svc = persistent(dir.path());
    svc.create_session_with_id("ro", profile(), None).unwrap();
    let before = svc.session("ro").unwrap();
    let sessions = dir.path().join(SESSIONS_DIR);
    std::fs::remove_dir_all(&sessions).unwrap();
    std::fs::write(&sessions, "not a directory").unwrap();
    let r = svc.post_utterance("ro", &persona_texts("bakery-ideation")[0]);
    assert!(matches!(r, Err(ServiceError::Io { .. })), "{r:?}");
    assert_eq!(svc.session("ro").unwrap(), before);
}

#[test]
fn deleted_session_is_not_reloaded() {
    let dir = tempfile::tempdir().unwrap();
    persistent(dir.path()).create_session_with_id("gone", profile(), None).unwrap();
    persistent(dir.path()).delete("gone").unwrap();
    assert!(matches!(persistent(dir.path()).view("gone"), Err(ServiceError::UnknownSession(_))));
}

#[test]
fn terminated_session_stays_terminated_after_reload() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Arc::new(persistent(dir.path()));
    svc.create_session_with_id("done", profile(), None).unwrap();
    for t in persona_texts("bakery-ideation") {
        svc.post_utterance("done", &t).unwrap();
    }
    drop(svc);
    let again = persistent(dir.path());
    assert!(matches!(again.post_utterance("done", "One more question?"), Err(ServiceError::SessionNotActive { .. })));
}
