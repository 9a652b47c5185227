//! Mood-based song recommendation from RLID ratings (rhythm, lyrics,
//! instruments, danceability, each 1..=3) with a per-mood feedback board.

pub mod play;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpotifyError {
    #[error("RLID components must be between 1 and 3, got {0:?}")]
    OutOfRangeRating([u8; 4]),
    #[error("song `{song}` already has feedback for mood `{mood}`")]
    DuplicateFeedback { mood: String, song: String },
    #[error("a rejection needs a reason")]
    MissingRejectionReason,
    #[error("unknown song `{0}`")]
    UnknownSong(String),
    #[error("unknown mood `{0}`")]
    UnknownMood(String),
}

impl SpotifyError {
    pub fn code(&self) -> &'static str {
        match self {
            SpotifyError::OutOfRangeRating(_) => "out-of-range-rating",
            SpotifyError::DuplicateFeedback { .. } => "duplicate-feedback",
            SpotifyError::MissingRejectionReason => "missing-rejection-reason",
            SpotifyError::UnknownSong(_) => "unknown-song",
            SpotifyError::UnknownMood(_) => "unknown-mood",
        }
    }
}

/// Serialized as `[r, l, i, d]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[u8; 4]", into = "[u8; 4]")]
pub struct RlidRating {
    pub rhythm: u8,
    pub lyrics: u8,
    pub instruments: u8,
    pub danceability: u8,
}

impl From<[u8; 4]> for RlidRating {
    fn from([rhythm, lyrics, instruments, danceability]: [u8; 4]) -> Self {
        RlidRating {
            rhythm,
            lyrics,
            instruments,
            danceability,
        }
    }
}

impl From<RlidRating> for [u8; 4] {
    fn from(r: RlidRating) -> Self {
        r.components()
    }
}

impl RlidRating {
    pub fn new(components: [u8; 4]) -> Result<Self, SpotifyError> {
        let r = RlidRating::from(components);
        r.check()?;
        Ok(r)
    }

    pub fn components(&self) -> [u8; 4] {
        [self.rhythm, self.lyrics, self.instruments, self.danceability]
    }

    pub fn check(&self) -> Result<(), SpotifyError> {
        if self.components().iter().all(|c| (1..=3).contains(c)) {
            Ok(())
        } else {
            Err(SpotifyError::OutOfRangeRating(self.components()))
        }
    }

    pub fn l1_distance(&self, other: &RlidRating) -> u32 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| u32::from(a.abs_diff(b)))
            .sum()
    }
}

/// The neurons' code for a song: the sum of its four components.
pub fn neuron_score(rating: &RlidRating) -> u32 {
    rating.components().iter().map(|&c| u32::from(c)).sum()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorRating {
    pub actor: String,
    pub rating: RlidRating,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SongProfile {
    pub id: String,
    pub title: String,
    /// Aggregate of `sensor_ratings`; absent until someone rates the song.
    pub rating: Option<RlidRating>,
    pub sensor_ratings: Vec<SensorRating>,
}

impl SongProfile {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        SongProfile {
            id: id.into(),
            title: title.into(),
            rating: None,
            sensor_ratings: Vec::new(),
        }
    }

    pub fn score(&self) -> Option<u32> {
        self.rating.as_ref().map(neuron_score)
    }
}

/// Records `actor`'s rating (replacing an earlier one from the same actor)
/// and recomputes the aggregate: per-component mean, rounded half up.
pub fn rate_song(mut song: SongProfile, actor: &str, rating: RlidRating) -> Result<SongProfile, SpotifyError> {
    rating.check()?;
    match song.sensor_ratings.iter_mut().find(|s| s.actor == actor) {
        Some(existing) => existing.rating = rating,
        None => song.sensor_ratings.push(SensorRating {
            actor: actor.to_string(),
            rating,
        }),
    }
    song.rating = aggregate(&song.sensor_ratings);
    Ok(song)
}

fn aggregate(ratings: &[SensorRating]) -> Option<RlidRating> {
    if ratings.is_empty() {
        return None;
    }
    let n = ratings.len() as u32;
    let mut merged = [0u8; 4];
    for (k, slot) in merged.iter_mut().enumerate() {
        let sum: u32 = ratings.iter().map(|s| u32::from(s.rating.components()[k])).sum();
        // round(sum / n) with halves going up
        *slot = ((2 * sum + n) / (2 * n)) as u8;
    }
    Some(RlidRating::from(merged))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoodProfile {
    pub name: String,
    pub target: RlidRating,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub song: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoodFeedback {
    pub accepted: Vec<String>,
    pub rejected: Vec<Rejection>,
}

impl MoodFeedback {
    pub fn is_accepted(&self, song: &str) -> bool {
        self.accepted.iter().any(|s| s == song)
    }

    pub fn is_rejected(&self, song: &str) -> bool {
        self.rejected.iter().any(|r| r.song == song)
    }
}

/// Exported as a JSON object keyed by mood.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeedbackBoard {
    pub moods: BTreeMap<String, MoodFeedback>,
}

impl FeedbackBoard {
    pub fn mood(&self, mood: &str) -> Option<&MoodFeedback> {
        self.moods.get(mood)
    }

    pub fn entry_count(&self) -> usize {
        self.moods
            .values()
            .map(|m| m.accepted.len() + m.rejected.len())
            .sum()
    }
}

pub fn record_feedback(
    mut board: FeedbackBoard,
    mood: &str,
    song: &str,
    accepted: bool,
    reason: Option<&str>,
) -> Result<FeedbackBoard, SpotifyError> {
    let entry = board.moods.entry(mood.to_string()).or_default();
    if entry.is_accepted(song) || entry.is_rejected(song) {
        return Err(SpotifyError::DuplicateFeedback {
            mood: mood.to_string(),
            song: song.to_string(),
        });
    }
    if accepted {
        entry.accepted.push(song.to_string());
    } else {
        let reason = reason
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .ok_or(SpotifyError::MissingRejectionReason)?;
        entry.rejected.push(Rejection {
            song: song.to_string(),
            reason: reason.to_string(),
        });
    }
    Ok(board)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedSong {
    pub id: String,
    pub previously_accepted: bool,
    pub distance: u32,
    pub score: u32,
}

/// Rated, non-rejected songs ordered by: accepted before for this mood,
/// then L1 distance to the mood target, then higher score, then id.
pub fn rank_candidates(catalog: &[SongProfile], mood: &MoodProfile, board: &FeedbackBoard) -> Vec<RankedSong> {
    let history = board.mood(&mood.name);
    let mut ranked: Vec<RankedSong> = catalog
        .iter()
        .filter(|song| !history.is_some_and(|h| h.is_rejected(&song.id)))
        .filter_map(|song| {
            let rating = song.rating?;
            Some(RankedSong {
                id: song.id.clone(),
                previously_accepted: history.is_some_and(|h| h.is_accepted(&song.id)),
                distance: rating.l1_distance(&mood.target),
                score: neuron_score(&rating),
            })
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.previously_accepted
            .cmp(&a.previously_accepted)
            .then(a.distance.cmp(&b.distance))
            .then(b.score.cmp(&a.score))
            .then(a.id.cmp(&b.id))
    });
    ranked
}

pub fn recommend(catalog: &[SongProfile], mood: &MoodProfile, board: &FeedbackBoard) -> Option<String> {
    rank_candidates(catalog, mood, board)
        .into_iter()
        .next()
        .map(|r| r.id)
}
