//! Session snapshots on disk.
//!
//! Layout under the store root:
//!
//! ```text
//! <root>/
//!   sessions/
//!     <session-id>.json       latest snapshot of one session
//!     .<session-id>.json.tmp  partial write, renamed over the snapshot when complete
//! ```
//!
//! Each snapshot is the document produced by `Session::to_json`. Writes go to
//! the temporary file first and are renamed into place, so a reader never sees
//! a half-written snapshot. Leftover temporary files are ignored.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mission_core::engine::Session;

use crate::ServiceError;

pub const SESSIONS_DIR: &str = "sessions";

#[derive(Debug, Clone)]
pub struct SnapshotStore {
    dir: PathBuf,
}

/// Session ids become file names, so only a safe alphabet is accepted.
pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SnapshotStore {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let dir = root.as_ref().join(SESSIONS_DIR);
        fs::create_dir_all(&dir).map_err(|e| ServiceError::io(&dir, e))?;
        Ok(Self { dir })
    }

    fn path(&self, id: &str) -> Result<PathBuf, ServiceError> {
        if !valid_session_id(id) {
            return Err(ServiceError::UnknownSession(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    pub fn save(&self, session: &Session) -> Result<(), ServiceError> {
        let path = self.path(&session.id)?;
        let tmp = self.dir.join(format!(".{}.json.tmp", session.id));
        let text = session.to_json()?;
        let mut f = fs::File::create(&tmp).map_err(|e| ServiceError::io(&tmp, e))?;
        f.write_all(text.as_bytes()).map_err(|e| ServiceError::io(&tmp, e))?;
        f.sync_all().map_err(|e| ServiceError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| ServiceError::io(&path, e))
    }

    pub fn load(&self, id: &str) -> Result<Option<Session>, ServiceError> {
        let path = self.path(id)?;
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(Session::from_json(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ServiceError::io(&path, e)),
        }
    }

    /// Removes a snapshot, reporting whether one existed.
    pub fn delete(&self, id: &str) -> Result<bool, ServiceError> {
        let path = self.path(id)?;
        match fs::remove_file(&path) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(ServiceError::io(&path, e)),
        }
    }

    /// Ids of all stored sessions, sorted.
    pub fn ids(&self) -> Result<Vec<String>, ServiceError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(|e| ServiceError::io(&self.dir, e))? {
            let entry = entry.map_err(|e| ServiceError::io(&self.dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".json") {
                if valid_session_id(id) {
                    out.push(id.to_string());
                }
            }
        }
        out.sort();
        Ok(out)
    }
}
