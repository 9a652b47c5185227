//! Event-sourced session container shared by all games.
//!
//! A session is its config plus an append-only log. Every transition is a
//! pure function of (state, actor, action, RNG stream); the RNG stream is
//! seeded from the config, so folding the log over the initial state
//! reproduces the live state exactly. Timestamps are informational.

mod config;
mod game;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{validate_config, DisplayMode, GameKind, GamePayload, LessonConfig};
pub use game::{strip_keys, GameState, Lifecycle, Outcome, Play};

use crate::classroom_spotify::SpotifyError;
use crate::little_trainers::TrainerError;
use crate::predictors::PredictorError;
use crate::surprise_box::SurpriseBoxError;
use crate::threshold_network::NetworkError;
use crate::validation::ValidationReport;
use crate::SessionRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("invalid config:\n{0}")]
    InvalidConfig(ValidationReport),
    #[error("illegal action: {0}")]
    IllegalAction(String),
    #[error("wrong phase: expected {expected}, currently {actual}")]
    WrongPhase { expected: String, actual: String },
    #[error("unknown actor `{0}`")]
    UnknownActor(String),
    #[error("malformed action: {0}")]
    MalformedAction(String),
    #[error("replay diverged at seq {seq}: {reason}")]
    ReplayDivergence { seq: u64, reason: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    SurpriseBox(#[from] SurpriseBoxError),
    #[error(transparent)]
    Trainers(#[from] TrainerError),
    #[error(transparent)]
    Predictors(#[from] PredictorError),
    #[error(transparent)]
    Spotify(#[from] SpotifyError),
}

impl SessionError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::InvalidConfig(_) => "invalid-config",
            SessionError::IllegalAction(_) => "illegal-action",
            SessionError::WrongPhase { .. } => "wrong-phase",
            SessionError::UnknownActor(_) => "unknown-actor",
            SessionError::MalformedAction(_) => "malformed-action",
            SessionError::ReplayDivergence { .. } => "replay-divergence",
            SessionError::Network(e) => e.code(),
            SessionError::SurpriseBox(e) => e.code(),
            SessionError::Trainers(e) => e.code(),
            SessionError::Predictors(e) => e.code(),
            SessionError::Spotify(e) => e.code(),
        }
    }

    pub(crate) fn wrong_phase(expected: impl fmt::Display, actual: impl fmt::Display) -> Self {
        SessionError::WrongPhase {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

/// Who performed an action. `teacher` and `system` are reserved; anything
/// else matching `[A-Za-z0-9][A-Za-z0-9_.-]*` is a student or group label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Actor {
    Teacher,
    System,
    Student(String),
}

impl Actor {
    pub fn is_teacher(&self) -> bool {
        matches!(self, Actor::Teacher)
    }

    pub fn label(&self) -> &str {
        match self {
            Actor::Teacher => "teacher",
            Actor::System => "system",
            Actor::Student(s) => s,
        }
    }

    pub(crate) fn require_teacher(&self, what: &str) -> Result<(), SessionError> {
        if self.is_teacher() {
            Ok(())
        } else {
            Err(SessionError::IllegalAction(format!(
                "only the teacher may {what}"
            )))
        }
    }
}

impl FromStr for Actor {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "teacher" => Ok(Actor::Teacher),
            "system" => Ok(Actor::System),
            _ => {
                let mut chars = s.chars();
                let well_formed = chars.next().is_some_and(|c| c.is_ascii_alphanumeric())
                    && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'));
                if well_formed {
                    Ok(Actor::Student(s.to_string()))
                } else {
                    Err(SessionError::UnknownActor(s.to_string()))
                }
            }
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One line of the session log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub actor: String,
    pub action: Value,
    pub recorded_at: DateTime<Utc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Setup,
    Running,
    Finished,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Setup => "setup",
            Status::Running => "running",
            Status::Finished => "finished",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Session {
    id: String,
    config: LessonConfig,
    status: Status,
    state: GameState,
    log: Vec<SessionEvent>,
    rng: SessionRng,
}

impl Session {
    pub fn create(config: LessonConfig) -> Result<Session, SessionError> {
        Self::create_with_id(new_session_id(), config)
    }

    pub fn create_with_id(id: impl Into<String>, config: LessonConfig) -> Result<Session, SessionError> {
        let report = config.validate();
        if report.has_errors() {
            return Err(SessionError::InvalidConfig(report));
        }
        Ok(Session {
            id: id.into(),
            state: GameState::init(&config.payload),
            rng: SessionRng::seed_from_u64(config.seed),
            status: Status::Setup,
            log: Vec::new(),
            config,
        })
    }

    /// Folds `events` over a fresh session. Events must be numbered
    /// 0, 1, 2, … and each must be legal where it stands.
    pub fn replay(config: LessonConfig, events: &[SessionEvent]) -> Result<Session, SessionError> {
        Self::replay_with_id(new_session_id(), config, events)
    }

    pub fn replay_with_id(
        id: impl Into<String>,
        config: LessonConfig,
        events: &[SessionEvent],
    ) -> Result<Session, SessionError> {
        let mut session = Session::create_with_id(id, config)?;
        for event in events {
            session.apply_recorded(event.clone())?;
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &LessonConfig {
        &self.config
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn log(&self) -> &[SessionEvent] {
        &self.log
    }

    /// Seq the next event will get.
    pub fn next_seq(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn apply_event(&mut self, actor: &str, action: Value) -> Result<Outcome, SessionError> {
        self.apply_event_at(actor, action, Utc::now())
    }

    /// Applies one action and appends it to the log. On error nothing
    /// changes.
    pub fn apply_event_at(
        &mut self,
        actor: &str,
        action: Value,
        recorded_at: DateTime<Utc>,
    ) -> Result<Outcome, SessionError> {
        if self.status == Status::Finished {
            return Err(SessionError::IllegalAction("the session is finished".into()));
        }
        let who: Actor = actor.parse()?;
        let kind = action.get("type").and_then(Value::as_str).unwrap_or_default();
        let (outcome, logged) = match kind {
            "start" => {
                who.require_teacher("start the session")?;
                if self.status != Status::Setup {
                    return Err(SessionError::IllegalAction("the session has already started".into()));
                }
                self.status = Status::Running;
                (Outcome::Lifecycle(Lifecycle::Started), json!({"type": "start"}))
            }
            "finish" => {
                who.require_teacher("finish the session")?;
                self.status = Status::Finished;
                (Outcome::Lifecycle(Lifecycle::Finished), json!({"type": "finish"}))
            }
            _ => {
                if self.status != Status::Running {
                    return Err(SessionError::IllegalAction(
                        "the session has not started; the teacher must start it first".into(),
                    ));
                }
                let mut state = self.state.clone();
                let mut rng = self.rng.clone();
                let result = state.apply(&who, &action, &mut rng)?;
                self.state = state;
                self.rng = rng;
                result
            }
        };
        self.log.push(SessionEvent {
            seq: self.next_seq(),
            actor: actor.to_string(),
            action: logged,
            recorded_at,
        });
        Ok(outcome)
    }

    /// Applies an event taken from a log, checking its position.
    pub fn apply_recorded(&mut self, event: SessionEvent) -> Result<Outcome, SessionError> {
        if event.seq != self.next_seq() {
            return Err(SessionError::ReplayDivergence {
                seq: event.seq,
                reason: format!("expected seq {}", self.next_seq()),
            });
        }
        self.apply_event_at(&event.actor, event.action, event.recorded_at)
            .map_err(|e| SessionError::ReplayDivergence {
                seq: event.seq,
                reason: e.to_string(),
            })
    }

    /// Complete internal state, hidden fields and RNG position included.
    /// Two sessions with equal snapshots behave identically from here on.
    pub fn snapshot(&self) -> Value {
        json!({
            "status": self.status,
            "next_seq": self.next_seq(),
            "rng_word_pos": self.rng.get_word_pos().to_string(),
            "state": self.state,
        })
    }

    /// What a viewer may see. `mode` can only narrow the configured
    /// display mode, never widen it.
    pub fn view(&self, mode: DisplayMode) -> Value {
        let mode = self.config.display_mode.restrict(mode);
        json!({
            "game": self.config.game,
            "status": self.status,
            "next_seq": self.next_seq(),
            "display_mode": mode,
            "state": self.state.view(mode),
        })
    }

    pub fn export_jsonl(&self) -> String {
        export_jsonl(&self.log)
    }
}

pub fn export_jsonl(events: &[SessionEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Parses a JSON Lines log; blank lines are skipped.
pub fn parse_jsonl(text: &str) -> Result<Vec<SessionEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}
