use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    neuron_score, rank_candidates, rate_song, record_feedback, FeedbackBoard, MoodProfile, RankedSong, RlidRating,
    SongProfile, SpotifyError,
};
use crate::session::{Actor, DisplayMode, Play, SessionError};
use crate::validation::ValidationReport;
use crate::SessionRng;

/// Sensor name recorded for ratings supplied in the lesson file.
pub const PRESET_SENSOR: &str = "preset";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SongSpec {
    pub id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<RlidRating>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpotifyPayload {
    pub songs: Vec<SongSpec>,
    pub moods: Vec<MoodProfile>,
}

impl SpotifyPayload {
    pub const FIELDS: &'static [&'static str] = &["songs", "moods"];

    pub fn catalog(&self) -> Vec<SongProfile> {
        self.songs
            .iter()
            .map(|s| {
                let song = SongProfile::new(s.id.clone(), s.title.clone());
                match s.rating {
                    Some(r) => rate_song(song.clone(), PRESET_SENSOR, r).unwrap_or(song),
                    None => song,
                }
            })
            .collect()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if self.songs.is_empty() {
            report.error("songs", "the catalog needs at least one song");
        }
        if self.moods.is_empty() {
            report.error("moods", "declare at least one mood");
        }
        let mut ids = BTreeSet::new();
        for (i, s) in self.songs.iter().enumerate() {
            if s.id.trim().is_empty() {
                report.error(format!("songs[{i}].id"), "song id must not be empty");
            }
            if !ids.insert(s.id.as_str()) {
                report.error(format!("songs[{i}].id"), format!("duplicate song `{}`", s.id));
            }
            if let Some(Err(e)) = s.rating.map(|r| r.check()) {
                report.error(format!("songs[{i}].rating"), e.to_string());
            }
        }
        let mut names = BTreeSet::new();
        for (i, m) in self.moods.iter().enumerate() {
            if m.name.trim().is_empty() {
                report.error(format!("moods[{i}].name"), "mood name must not be empty");
            }
            if !names.insert(m.name.as_str()) {
                report.error(format!("moods[{i}].name"), format!("duplicate mood `{}`", m.name));
            }
            if let Err(e) = m.target.check() {
                report.error(format!("moods[{i}].target"), e.to_string());
            }
        }
        report
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PendingRecommendation {
    pub user: String,
    pub mood: String,
    pub song: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpotifyPlay {
    catalog: Vec<SongProfile>,
    moods: Vec<MoodProfile>,
    board: FeedbackBoard,
    pending: Option<PendingRecommendation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpotifyAction {
    /// A sensor pins an RLID rating for a song.
    Rate { song: String, rating: RlidRating },
    /// The user states a mood and the deciders suggest a song.
    Request { mood: String },
    /// The user answers YES or NO; NO needs a reason.
    Respond {
        accepted: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SongCard {
    pub id: String,
    pub title: String,
    pub rating: RlidRating,
    pub score: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpotifyOutcome {
    Rated { song: String, sensor: String, aggregate: RlidRating, score: u32 },
    Recommended {
        user: String,
        mood: String,
        song: Option<SongCard>,
        ranking: Vec<RankedSong>,
    },
    FeedbackRecorded {
        mood: String,
        song: String,
        accepted: bool,
        reason: Option<String>,
        /// True when the song was already on the board for this mood.
        already_on_board: bool,
    },
}

impl SpotifyPlay {
    pub fn catalog(&self) -> &[SongProfile] {
        &self.catalog
    }

    pub fn board(&self) -> &FeedbackBoard {
        &self.board
    }

    fn mood(&self, name: &str) -> Result<&MoodProfile, SpotifyError> {
        self.moods
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| SpotifyError::UnknownMood(name.to_string()))
    }
}

impl Play for SpotifyPlay {
    type Payload = SpotifyPayload;
    type Action = SpotifyAction;
    type Outcome = SpotifyOutcome;

    const ANALYTIC_KEYS: &'static [&'static str] = &["ranking"];

    fn init(payload: &SpotifyPayload) -> Self {
        SpotifyPlay {
            catalog: payload.catalog(),
            moods: payload.moods.clone(),
            board: FeedbackBoard::default(),
            pending: None,
        }
    }

    fn apply(&mut self, actor: &Actor, action: SpotifyAction, _rng: &mut SessionRng) -> Result<SpotifyOutcome, SessionError> {
        match action {
            SpotifyAction::Rate { song, rating } => {
                let index = self
                    .catalog
                    .iter()
                    .position(|s| s.id == song)
                    .ok_or_else(|| SpotifyError::UnknownSong(song.clone()))?;
                let updated = rate_song(self.catalog[index].clone(), actor.label(), rating)?;
                let aggregate = updated.rating.expect("rated");
                self.catalog[index] = updated;
                Ok(SpotifyOutcome::Rated {
                    song,
                    sensor: actor.label().to_string(),
                    aggregate,
                    score: neuron_score(&aggregate),
                })
            }
            SpotifyAction::Request { mood } => {
                if self.pending.is_some() {
                    return Err(SessionError::wrong_phase("idle", "awaiting_response"));
                }
                let profile = self.mood(&mood)?.clone();
                let ranking = rank_candidates(&self.catalog, &profile, &self.board);
                let song = ranking.first().map(|r| {
                    let song = self.catalog.iter().find(|s| s.id == r.id).expect("ranked from catalog");
                    let rating = song.rating.expect("only rated songs rank");
                    SongCard {
                        id: song.id.clone(),
                        title: song.title.clone(),
                        rating,
                        score: neuron_score(&rating),
                    }
                });
                if let Some(card) = &song {
                    self.pending = Some(PendingRecommendation {
                        user: actor.label().to_string(),
                        mood: mood.clone(),
                        song: card.id.clone(),
                    });
                }
                Ok(SpotifyOutcome::Recommended {
                    user: actor.label().to_string(),
                    mood,
                    song,
                    ranking,
                })
            }
            SpotifyAction::Respond { accepted, reason } => {
                let pending = self
                    .pending
                    .clone()
                    .ok_or_else(|| SessionError::wrong_phase("awaiting_response", "idle"))?;
                let already = self
                    .board
                    .mood(&pending.mood)
                    .is_some_and(|m| m.is_accepted(&pending.song));
                if !(accepted && already) {
                    self.board = record_feedback(
                        self.board.clone(),
                        &pending.mood,
                        &pending.song,
                        accepted,
                        reason.as_deref(),
                    )?;
                }
                self.pending = None;
                Ok(SpotifyOutcome::FeedbackRecorded {
                    mood: pending.mood,
                    song: pending.song,
                    accepted,
                    reason: if accepted { None } else { reason.map(|r| r.trim().to_string()) },
                    already_on_board: accepted && already,
                })
            }
        }
    }

    fn view(&self) -> Value {
        let scores: Vec<Value> = self
            .catalog
            .iter()
            .filter_map(|s| s.score().map(|score| json!({"song": s.id, "score": score})))
            .collect();
        json!({
            "songs": self.catalog,
            "score_board": scores,
            "moods": self.moods,
            "feedback_board": self.board,
            "pending": self.pending,
        })
    }

    fn describe(outcome: &SpotifyOutcome, _mode: DisplayMode) -> String {
        match outcome {
            SpotifyOutcome::Rated { song, sensor, aggregate, score } => {
                let [r, l, i, d] = aggregate.components();
                format!("{sensor} rates {song}; RLID now ({r},{l},{i},{d}), score {score}")
            }
            SpotifyOutcome::Recommended { user, mood, song: Some(card), .. } => {
                format!("{user} feels {mood}: try {} \"{}\" (score {})", card.id, card.title, card.score)
            }
            SpotifyOutcome::Recommended { user, mood, song: None, .. } => {
                format!("{user} feels {mood}: no song left to suggest")
            }
            SpotifyOutcome::FeedbackRecorded { mood, song, accepted: true, .. } => {
                format!("YES: {song} pinned under {mood}")
            }
            SpotifyOutcome::FeedbackRecorded { mood, song, reason, .. } => {
                format!("NO: {song} rejected for {mood} ({})", reason.as_deref().unwrap_or(""))
            }
        }
    }
}
