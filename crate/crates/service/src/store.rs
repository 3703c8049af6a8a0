use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use poolal_core::harness::ExperimentConfig;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::error::ApiError;
use crate::session::{Advance, LabelSubmission, Mode, SessionState, SessionView, Submitted};

const SNAPSHOT_FORMAT: &str = "poolal-session";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    state: SessionState,
}

/// Mutations queue on `state`; reads take the last published `view` and
/// never wait for training.
struct Entry {
    state: Arc<Mutex<SessionState>>,
    view: RwLock<Arc<SessionView>>,
}

impl Entry {
    fn new(state: SessionState) -> Self {
        let view = RwLock::new(Arc::new(state.view()));
        Self {
            state: Arc::new(Mutex::new(state)),
            view,
        }
    }

    fn publish(&self, view: SessionView) {
        *self.view.write().expect("view lock poisoned") = Arc::new(view);
    }
}

/// In-memory sessions, optionally snapshotted to one JSON file per session
/// whenever a round completes.
#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    snapshot_dir: Option<PathBuf>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Snapshots go to `dir`, which is created if missing. Sessions already
    /// saved there are loaded.
    pub fn with_snapshots(dir: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| ApiError::internal(format!("{}: {e}", dir.display())))?;
        let mut sessions = HashMap::new();
        let entries = fs::read_dir(&dir).map_err(|e| ApiError::internal(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(|e| ApiError::internal(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let state = read_snapshot(&path)?;
            sessions.insert(state.id().to_owned(), Arc::new(Entry::new(state)));
        }
        tracing::info!(count = sessions.len(), dir = %dir.display(), "restored sessions");
        Ok(Self {
            sessions: RwLock::new(sessions),
            snapshot_dir: Some(dir),
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn entry(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.sessions
            .read()
            .expect("store lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    pub async fn create(&self, config: ExperimentConfig, mode: Mode) -> Result<Arc<SessionView>, ApiError> {
        let id = uuid::Uuid::new_v4().to_string();
        let state = blocking(move || SessionState::create(id, config, mode)).await?;
        self.save(&state);
        let entry = Arc::new(Entry::new(state));
        let view = entry.view.read().expect("view lock poisoned").clone();
        self.sessions
            .write()
            .expect("store lock poisoned")
            .insert(view.summary.session_id.clone(), entry);
        Ok(view)
    }

    pub fn view(&self, id: &str) -> Result<Arc<SessionView>, ApiError> {
        Ok(self.entry(id)?.view.read().expect("view lock poisoned").clone())
    }

    pub async fn advance(&self, id: &str) -> Result<Advance, ApiError> {
        self.mutate(id, |state| state.advance()).await
    }

    pub async fn submit(&self, id: &str, labels: Vec<LabelSubmission>) -> Result<Submitted, ApiError> {
        self.mutate(id, move |state| state.submit(&labels)).await
    }

    async fn mutate<T, F>(&self, id: &str, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut SessionState) -> Result<T, ApiError> + Send + 'static,
    {
        let entry = self.entry(id)?;
        let mut guard = entry.state.clone().lock_owned().await;
        let snapshot_dir = self.snapshot_dir.clone();
        let (out, view) = blocking(move || {
            let round_before = guard.experiment().round();
            let out = f(&mut guard);
            if guard.experiment().round() != round_before && guard.at_round_boundary() {
                if let Some(dir) = snapshot_dir {
                    write_snapshot(&dir, &guard);
                }
            }
            Ok((out, guard.view()))
        })
        .await?;
        entry.publish(view);
        out
    }

    fn save(&self, state: &SessionState) {
        if let Some(dir) = &self.snapshot_dir {
            write_snapshot(dir, state);
        }
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

pub fn snapshot_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

/// A failed snapshot is logged; the in-memory session stays authoritative.
fn write_snapshot(dir: &Path, state: &SessionState) {
    let snapshot = Snapshot {
        format: SNAPSHOT_FORMAT.into(),
        version: SNAPSHOT_VERSION,
        state: state.clone(),
    };
    let path = snapshot_path(dir, state.id());
    let tmp = path.with_extension("json.tmp");
    let result = serde_json::to_vec(&snapshot)
        .map_err(std::io::Error::other)
        .and_then(|bytes| fs::write(&tmp, bytes))
        .and_then(|()| fs::rename(&tmp, &path));
    if let Err(e) = result {
        tracing::warn!(path = %path.display(), error = %e, "snapshot failed");
    }
}

fn read_snapshot(path: &Path) -> Result<SessionState, ApiError> {
    let bad = |msg: String| ApiError::internal(format!("{}: {msg}", path.display()));
    let bytes = fs::read(path).map_err(|e| bad(e.to_string()))?;
    let snapshot: Snapshot = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
    if snapshot.format != SNAPSHOT_FORMAT || snapshot.version != SNAPSHOT_VERSION {
        return Err(bad(format!(
            "unsupported snapshot {} v{}",
            snapshot.format, snapshot.version
        )));
    }
    Ok(snapshot.state)
}
