//! All sessions of one service instance and their on-disk index.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use gnt_core::engine::Status;
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::session::{now_ms, LiveSession, View};
use crate::{Error, Result};

pub const INDEX_FILE: &str = "index.jsonl";
const SESSIONS_DIR: &str = "sessions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexLine {
    id: String,
    created_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub session_id: String,
    pub status: Status,
    pub k: u64,
}

pub type Handle = Arc<Mutex<LiveSession>>;

/// Lock a session, recovering from a poisoned mutex: every mutation is
/// persisted before it is applied, so the in-memory state stays usable.
pub fn lock(h: &Handle) -> std::sync::MutexGuard<'_, LiveSession> {
    h.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug)]
pub struct Registry {
    root: PathBuf,
    default_alpha: f64,
    index: Mutex<File>,
    sessions: RwLock<HashMap<String, Handle>>,
}

impl Registry {
    /// Open `data_dir`, replaying every indexed session.
    pub fn open(data_dir: &Path, default_alpha: f64) -> Result<Self> {
        if !(default_alpha > 0.0 && default_alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("default alpha must lie in (0, 1), got {default_alpha}")));
        }
        let root = data_dir.join(SESSIONS_DIR);
        fs::create_dir_all(&root)?;
        let index_path = data_dir.join(INDEX_FILE);
        let text = fs::read_to_string(&index_path).unwrap_or_default();
        let mut sessions = HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let Ok(entry) = serde_json::from_str::<IndexLine>(line) else {
                tracing::warn!("skipping unreadable index line");
                continue;
            };
            match LiveSession::restore(&root.join(&entry.id), default_alpha) {
                Ok(s) => {
                    tracing::info!(session = %entry.id, events = s.log().len(), "restored");
                    sessions.insert(entry.id, Arc::new(Mutex::new(s)));
                }
                Err(e) => tracing::error!(session = %entry.id, error = %e, "cannot restore"),
            }
        }
        if !text.is_empty() && !text.ends_with('\n') {
            OpenOptions::new().append(true).open(&index_path)?.write_all(b"\n")?;
        }
        let index = OpenOptions::new().create(true).append(true).open(&index_path)?;
        Ok(Self { root, default_alpha, index: Mutex::new(index), sessions: RwLock::new(sessions) })
    }

    pub fn default_alpha(&self) -> f64 {
        self.default_alpha
    }

    pub fn create(&self, config: SessionConfig) -> Result<View> {
        let id = uuid::Uuid::new_v4().to_string();
        let session = LiveSession::create(&self.root, id.clone(), config, self.default_alpha)?;
        let view = session.view();
        let created_ms = now_ms();
        {
            let mut index = self.index.lock().unwrap_or_else(|e| e.into_inner());
            let mut line = serde_json::to_string(&IndexLine { id: id.clone(), created_ms })
                .map_err(|e| Error::Internal(e.to_string()))?;
            line.push('\n');
            index.write_all(line.as_bytes())?;
            index.sync_data()?;
        }
        tracing::info!(session = %id, n = view.entries.len(), "created");
        self.sessions.write().unwrap_or_else(|e| e.into_inner()).insert(id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    pub fn get(&self, id: &str) -> Result<Handle> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.into()))
    }

    pub fn list(&self) -> Vec<Summary> {
        let handles: Vec<Handle> = self.sessions.read().unwrap_or_else(|e| e.into_inner()).values().cloned().collect();
        let mut out: Vec<Summary> = handles
            .iter()
            .map(|h| {
                let s = lock(h);
                Summary { session_id: s.id().into(), status: s.status(), k: s.log().last().map_or(0, |l| l.k) }
            })
            .collect();
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        out
    }
}
