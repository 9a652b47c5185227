//! Engines for five embodied AI classroom games, hosted in a shared
//! event-sourced session container.
//!
//! - [`threshold_network`]: students as threshold neurons joined by weighted ropes
//! - [`surprise_box`]: choosing between two boxes with purchasable information
//! - [`little_trainers`]: labeling, classifying, testing and correcting data cards
//! - [`predictors`]: spotting a repeating pattern, and being surprised by it
//! - [`classroom_spotify`]: rating songs and recommending them by mood
//!
//! Every game runs inside a [`session::Session`], which records each action
//! in an append-only log that can be replayed to the identical state.

pub mod classroom_spotify;
pub mod little_trainers;
pub mod predictors;
pub mod session;
pub mod surprise_box;
pub mod threshold_network;
pub mod validation;

/// The single random stream owned by each session.
pub type SessionRng = rand_chacha::ChaCha8Rng;

pub use session::{
    export_jsonl, parse_jsonl, validate_config, Actor, DisplayMode, GameKind, GamePayload, LessonConfig, Outcome,
    Session, SessionError, SessionEvent, Status,
};
pub use validation::{Diagnostic, Severity, ValidationReport};
