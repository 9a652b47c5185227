//! HTTP facade over classplay sessions.
//!
//! Writes go through `POST /sessions/{id}/events` with an optimistic
//! `expected_seq` token; readers poll `GET /sessions/{id}/state` or follow
//! `GET /sessions/{id}/stream`, a server-sent event feed carrying one
//! `{seq, state, outcome}` message per applied event.

pub mod store;

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use classplay_core::{
    DisplayMode, GameKind, LessonConfig, Outcome, Session, SessionError, SessionEvent, Status, ValidationReport,
};
use futures::stream::Stream;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::{watch, Mutex};

pub use store::{LogStore, StoreError};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("invalid lesson config")]
    InvalidConfig(ValidationReport),
    #[error("{0}")]
    BadRequest(String),
    #[error("expected_seq {got} is stale; the session is at {next_seq}")]
    SeqConflict { got: u64, next_seq: u64 },
    #[error(transparent)]
    Engine(SessionError),
    #[error("could not persist the event: {0}")]
    Storage(#[from] StoreError),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.to_string();
        let (status, body) = match &self {
            ApiError::NotFound(_) => (StatusCode::NOT_FOUND, json!({"error": "session-not-found", "message": message})),
            ApiError::InvalidConfig(report) => (
                StatusCode::BAD_REQUEST,
                json!({"error": "invalid-config", "message": message, "diagnostics": report.diagnostics}),
            ),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, json!({"error": "malformed-request", "message": message})),
            ApiError::SeqConflict { next_seq, .. } => (
                StatusCode::CONFLICT,
                json!({"error": "seq-conflict", "message": message, "next_seq": next_seq}),
            ),
            ApiError::Engine(e) => (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": e.code(), "message": message})),
            ApiError::Storage(_) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({"error": "storage-error", "message": message}),
            ),
        };
        (status, Json(body)).into_response()
    }
}

/// One streamed message, pre-rendered for both display modes.
#[derive(Debug)]
struct StreamRecord {
    seq: u64,
    teacher: String,
    student: String,
}

impl StreamRecord {
    fn render(session: &Session, seq: u64, outcome: &Outcome) -> Self {
        let render = |mode: DisplayMode| {
            let mode = session.config().display_mode.restrict(mode);
            json!({"seq": seq, "state": session.view(mode), "outcome": outcome.view(mode)}).to_string()
        };
        StreamRecord {
            seq,
            teacher: render(DisplayMode::Teacher),
            student: render(DisplayMode::Student),
        }
    }

    fn data(&self, mode: DisplayMode) -> &str {
        match mode {
            DisplayMode::Teacher => &self.teacher,
            DisplayMode::Student => &self.student,
        }
    }
}

/// Append-only record history plus a watch channel that wakes followers.
/// Records are pushed before the watch value changes, so a follower that
/// marks the value seen and then reads the history never misses one.
struct Feed {
    records: RwLock<Vec<Arc<StreamRecord>>>,
    notify: watch::Sender<Status>,
}

impl Feed {
    fn new(status: Status) -> Self {
        Feed {
            records: RwLock::new(Vec::new()),
            notify: watch::Sender::new(status),
        }
    }

    fn publish(&self, record: StreamRecord, status: Status) {
        self.records.write().expect("feed lock").push(Arc::new(record));
        // Always bumps the version, even when the status is unchanged.
        self.notify.send_replace(status);
    }

    fn get(&self, index: usize) -> Option<Arc<StreamRecord>> {
        self.records.read().expect("feed lock").get(index).cloned()
    }
}

struct LiveSession {
    game: GameKind,
    session: Mutex<Session>,
    feed: Feed,
}

impl LiveSession {
    /// Rebuilds a session from its log, re-rendering the stream history.
    fn restore(id: &str, config: LessonConfig, events: &[SessionEvent]) -> Result<Self, SessionError> {
        let mut session = Session::create_with_id(id, config)?;
        let feed = Feed::new(session.status());
        for event in events {
            let seq = event.seq;
            let outcome = session.apply_recorded(event.clone())?;
            feed.publish(StreamRecord::render(&session, seq, &outcome), session.status());
        }
        Ok(LiveSession {
            game: session.config().game,
            session: Mutex::new(session),
            feed,
        })
    }
}

/// A session that could not be restored on resume.
#[derive(Debug)]
pub struct ResumeFailure {
    pub id: String,
    pub reason: String,
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<BTreeMap<String, Arc<LiveSession>>>>,
    store: Option<LogStore>,
    config_dir: Option<PathBuf>,
}

impl AppState {
    /// `config_dir` holds lesson files that `POST /sessions` may name;
    /// `log_dir`, when given, receives every session's write-ahead log.
    pub fn new(config_dir: Option<PathBuf>, log_dir: Option<PathBuf>) -> Result<Self, StoreError> {
        Ok(AppState {
            sessions: Arc::default(),
            store: log_dir.map(LogStore::open).transpose()?,
            config_dir,
        })
    }

    /// Like [`AppState::new`], then replays every session logged in
    /// `log_dir`. Sessions whose logs no longer replay are skipped and
    /// reported.
    pub fn resume(config_dir: Option<PathBuf>, log_dir: PathBuf) -> Result<(Self, Vec<ResumeFailure>), StoreError> {
        let state = AppState::new(config_dir, Some(log_dir))?;
        let store = state.store.as_ref().expect("log dir given");
        let mut failures = Vec::new();
        let mut sessions = state.sessions.write().expect("registry lock");
        for id in store.ids()? {
            let restored = store
                .load(&id)
                .map_err(|e| e.to_string())
                .and_then(|s| LiveSession::restore(&s.id, s.config, &s.events).map_err(|e| e.to_string()));
            match restored {
                Ok(live) => {
                    sessions.insert(id, Arc::new(live));
                }
                Err(reason) => failures.push(ResumeFailure { id, reason }),
            }
        }
        drop(sessions);
        failures.sort_by(|a, b| a.id.cmp(&b.id));
        Ok((state, failures))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("registry lock").len()
    }

    fn get(&self, id: &str) -> Result<Arc<LiveSession>, ApiError> {
        self.sessions
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    fn lesson_file(&self, name: &str) -> Result<Value, ApiError> {
        let dir = self
            .config_dir
            .as_ref()
            .ok_or_else(|| ApiError::BadRequest("this server has no lesson directory".into()))?;
        if name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(ApiError::BadRequest(format!("bad lesson name `{name}`")));
        }
        let text = std::fs::read_to_string(dir.join(name))
            .map_err(|e| ApiError::BadRequest(format!("lesson `{name}`: {e}")))?;
        serde_json::from_str(&text).map_err(|e| ApiError::BadRequest(format!("lesson `{name}`: {e}")))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}/events", post(submit_event))
        .route("/sessions/{id}/state", get(session_state))
        .route("/sessions/{id}/stream", get(session_stream))
        .with_state(state)
}

#[derive(Debug, Default, Deserialize)]
struct ViewQuery {
    view: Option<String>,
}

impl ViewQuery {
    fn mode(&self) -> Result<DisplayMode, ApiError> {
        match &self.view {
            None => Ok(DisplayMode::Teacher),
            Some(v) => v.parse().map_err(|e: String| ApiError::BadRequest(e)),
        }
    }
}

async fn list_sessions(State(state): State<AppState>) -> Json<Value> {
    let sessions = state.sessions.read().expect("registry lock");
    let list: Vec<Value> = sessions
        .iter()
        .map(|(id, live)| json!({"id": id, "game": live.game, "status": *live.feed.notify.borrow()}))
        .collect();
    Json(Value::Array(list))
}

/// The body is a lesson config, or `{"lesson": "<file>", "seed": n}`
/// naming a file in the server's lesson directory.
async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let mut value: Value =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("body is not JSON: {e}")))?;
    if let Some(name) = value.get("lesson").and_then(Value::as_str).filter(|_| value.get("game").is_none()) {
        let seed = value.get("seed").cloned();
        value = state.lesson_file(name)?;
        if let Some(seed) = seed {
            value["seed"] = seed;
        }
    }
    let (config, report) = LessonConfig::from_json(&value).map_err(ApiError::InvalidConfig)?;
    let session = Session::create(config).map_err(ApiError::Engine)?;
    let id = session.id().to_string();
    if let Some(store) = &state.store {
        store.create(&id, session.config())?;
    }
    let view = session.view(DisplayMode::Teacher);
    let live = LiveSession {
        game: session.config().game,
        feed: Feed::new(session.status()),
        session: Mutex::new(session),
    };
    state.sessions.write().expect("registry lock").insert(id.clone(), Arc::new(live));
    let body = json!({"id": id, "state": view, "warnings": report.diagnostics});
    Ok((StatusCode::CREATED, [(header::LOCATION, format!("/sessions/{id}"))], Json(body)).into_response())
}

#[derive(Debug, Deserialize)]
struct EventSubmission {
    expected_seq: u64,
    actor: String,
    action: Value,
}

async fn submit_event(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<ViewQuery>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let live = state.get(&id)?;
    let mode = query.mode()?;
    let submission: EventSubmission =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("bad event submission: {e}")))?;

    let mut session = live.session.lock().await;
    let next_seq = session.next_seq();
    if submission.expected_seq != next_seq {
        return Err(ApiError::SeqConflict {
            got: submission.expected_seq,
            next_seq,
        });
    }
    let mut draft = session.clone();
    let outcome = draft
        .apply_event(&submission.actor, submission.action)
        .map_err(ApiError::Engine)?;
    let event = draft.log().last().expect("an event was appended");
    if let Some(store) = &state.store {
        store.append(&id, event)?;
    }
    *session = draft;
    live.feed
        .publish(StreamRecord::render(&session, next_seq, &outcome), session.status());

    let mode = session.config().display_mode.restrict(mode);
    Ok(Json(json!({
        "seq": next_seq,
        "next_seq": session.next_seq(),
        "state": session.view(mode),
        "outcome": outcome.view(mode),
    })))
}

async fn session_state(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<ViewQuery>,
) -> Result<Json<Value>, ApiError> {
    let live = state.get(&id)?;
    let mode = query.mode()?;
    let session = live.session.lock().await;
    Ok(Json(session.view(mode)))
}

async fn session_stream(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<ViewQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let live = state.get(&id)?;
    let requested = query.mode()?;
    let mode = {
        let session = live.session.lock().await;
        session.config().display_mode.restrict(requested)
    };
    let start = match headers.get("last-event-id") {
        None => 0,
        Some(v) => {
            let last: u64 = v
                .to_str()
                .ok()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| ApiError::BadRequest("Last-Event-ID must be a seq number".into()))?;
            last as usize + 1
        }
    };
    let rx = live.feed.notify.subscribe();
    let stream = futures::stream::unfold((live, rx, start), move |(live, mut rx, next)| async move {
        loop {
            let status = *rx.borrow_and_update();
            if let Some(record) = live.feed.get(next) {
                let event = Event::default().id(record.seq.to_string()).data(record.data(mode));
                return Some((Ok(event), (live, rx, next + 1)));
            }
            if status == Status::Finished {
                return None;
            }
            if rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

/// Serves `router(state)` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn view_query_defaults_to_teacher() {
        assert_eq!(ViewQuery::default().mode().unwrap(), DisplayMode::Teacher);
        let q = ViewQuery {
            view: Some("student".into()),
        };
        assert_eq!(q.mode().unwrap(), DisplayMode::Student);
        let bad = ViewQuery {
            view: Some("everyone".into()),
        };
        assert!(matches!(bad.mode(), Err(ApiError::BadRequest(_))));
    }

    #[test]
    fn publishing_wakes_followers() {
        let feed = Feed::new(Status::Setup);
        let mut rx = feed.notify.subscribe();
        rx.borrow_and_update();
        let record = StreamRecord {
            seq: 0,
            teacher: "t".into(),
            student: "s".into(),
        };
        feed.publish(record, Status::Setup);
        assert!(rx.has_changed().unwrap());
        assert_eq!(feed.get(0).unwrap().data(DisplayMode::Student), "s");
        assert!(feed.get(1).is_none());
    }
}
