//! Write-ahead session persistence: `<id>.lesson.json` holds the config and
//! `<id>.jsonl` the event log, one line appended (and synced) per event
//! before the client is answered.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use classplay_core::{parse_jsonl, LessonConfig, SessionEvent};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug)]
pub struct LogStore {
    dir: PathBuf,
}

/// A session found on disk, not yet replayed.
#[derive(Debug)]
pub struct StoredSession {
    pub id: String,
    pub config: LessonConfig,
    pub events: Vec<SessionEvent>,
}

impl LogStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        Ok(LogStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn config_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.lesson.json"))
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn create(&self, id: &str, config: &LessonConfig) -> Result<(), StoreError> {
        let path = self.config_path(id);
        let text = serde_json::to_string_pretty(&config.to_json()).expect("configs serialize");
        fs::write(&path, text + "\n").map_err(io(&path))?;
        let log = self.log_path(id);
        File::create(&log).map_err(io(&log))?.sync_all().map_err(io(&log))
    }

    pub fn append(&self, id: &str, event: &SessionEvent) -> Result<(), StoreError> {
        let path = self.log_path(id);
        let mut file = OpenOptions::new().append(true).open(&path).map_err(io(&path))?;
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(io(&path))?;
        file.sync_data().map_err(io(&path))
    }

    /// Ids of every session in the directory, sorted.
    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)
            .map_err(io(&self.dir))?
            .filter_map(|entry| {
                let name = entry.ok()?.file_name().into_string().ok()?;
                name.strip_suffix(".lesson.json").map(str::to_string)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn load(&self, id: &str) -> Result<StoredSession, StoreError> {
        let path = self.config_path(id);
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        let config = LessonConfig::from_str_json(&text)
            .map_err(|report| StoreError::Corrupt {
                path: path.clone(),
                message: report.to_string().trim_end().to_string(),
            })?
            .0;
        let log = self.log_path(id);
        let events = match fs::read_to_string(&log) {
            Ok(text) => parse_jsonl(&text).map_err(|e| StoreError::Corrupt {
                path: log.clone(),
                message: e.to_string(),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io(&log)(e)),
        };
        Ok(StoredSession {
            id: id.to_string(),
            config,
            events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use classplay_core::Session;
    use serde_json::json;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = LogStore::open(dir.path().join("logs")).unwrap();
        let text = include_str!("../../../lessons/cnn.lesson.json");
        let config = LessonConfig::from_str_json(text).unwrap().0;
        let mut session = Session::create_with_id("abc", config.clone()).unwrap();
        store.create("abc", &config).unwrap();
        session.apply_event("teacher", json!({"type": "start"})).unwrap();
        store.append("abc", &session.log()[0]).unwrap();

        assert_eq!(store.ids().unwrap(), ["abc"]);
        let loaded = store.load("abc").unwrap();
        assert_eq!(loaded.config, config);
        assert_eq!(loaded.events, session.log());
    }

    #[test]
    fn missing_log_means_no_events() {
        let dir = tempfile::tempdir().unwrap();
        let store = LogStore::open(dir.path()).unwrap();
        let text = include_str!("../../../lessons/predictors.lesson.json");
        let config = LessonConfig::from_str_json(text).unwrap().0;
        store.create("x", &config).unwrap();
        std::fs::remove_file(dir.path().join("x.jsonl")).unwrap();
        assert!(store.load("x").unwrap().events.is_empty());
        std::fs::write(dir.path().join("x.jsonl"), "not json\n").unwrap();
        assert!(matches!(store.load("x"), Err(StoreError::Corrupt { .. })));
    }
}
