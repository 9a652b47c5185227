//! Dispatch from the session container to the five game state machines.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{Actor, DisplayMode, GamePayload, SessionError};
use crate::classroom_spotify::play::SpotifyPlay;
use crate::little_trainers::play::TrainersPlay;
use crate::predictors::play::PredictorsPlay;
use crate::surprise_box::play::SurpriseBoxPlay;
use crate::threshold_network::play::CnnPlay;
use crate::SessionRng;

/// One game's state machine. Transitions must leave `self` untouched when
/// they fail.
pub trait Play: Clone + Serialize + Sized {
    type Payload;
    type Action: DeserializeOwned + Serialize;
    type Outcome: Clone + Serialize;

    /// Keys stripped, at any depth, from student-mode views and outcomes.
    const ANALYTIC_KEYS: &'static [&'static str];

    fn init(payload: &Self::Payload) -> Self;

    fn apply(
        &mut self,
        actor: &Actor,
        action: Self::Action,
        rng: &mut SessionRng,
    ) -> Result<Self::Outcome, SessionError>;

    /// Teacher-level view. Never includes information hidden from every
    /// player (such as where the prize is before a box is opened).
    fn view(&self) -> Value;

    /// Short plain-text rendering for terminals.
    fn describe(outcome: &Self::Outcome, mode: DisplayMode) -> String;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "game", rename_all = "snake_case")]
pub enum GameState {
    Cnn(CnnPlay),
    SurpriseBox(SurpriseBoxPlay),
    LittleTrainers(TrainersPlay),
    Predictors(PredictorsPlay),
    ClassroomSpotify(SpotifyPlay),
}

/// What an applied event visibly changed.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Lifecycle(Lifecycle),
    Cnn(<CnnPlay as Play>::Outcome),
    SurpriseBox(<SurpriseBoxPlay as Play>::Outcome),
    LittleTrainers(<TrainersPlay as Play>::Outcome),
    Predictors(<PredictorsPlay as Play>::Outcome),
    ClassroomSpotify(<SpotifyPlay as Play>::Outcome),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Lifecycle {
    Started,
    Finished,
}

fn parse_action<A: DeserializeOwned>(action: &Value) -> Result<A, SessionError> {
    serde_json::from_value(action.clone()).map_err(|e| SessionError::MalformedAction(e.to_string()))
}

fn canonical<A: Serialize>(action: &A) -> Value {
    serde_json::to_value(action).expect("actions serialize")
}

macro_rules! dispatch {
    ($($variant:ident => $play:ty),* $(,)?) => {
        impl GameState {
            pub fn init(payload: &GamePayload) -> Self {
                match payload {
                    $(GamePayload::$variant(p) => GameState::$variant(<$play>::init(p)),)*
                }
            }

            /// Applies a game action, returning the outcome and the action in
            /// canonical JSON form for the log.
            pub(crate) fn apply(
                &mut self,
                actor: &Actor,
                action: &Value,
                rng: &mut SessionRng,
            ) -> Result<(Outcome, Value), SessionError> {
                match self {
                    $(GameState::$variant(state) => {
                        let typed: <$play as Play>::Action = parse_action(action)?;
                        let logged = canonical(&typed);
                        let outcome = state.apply(actor, typed, rng)?;
                        Ok((Outcome::$variant(outcome), logged))
                    })*
                }
            }

            pub fn view(&self, mode: DisplayMode) -> Value {
                match self {
                    $(GameState::$variant(state) => project(state.view(), mode, <$play>::ANALYTIC_KEYS),)*
                }
            }
        }

        impl Outcome {
            pub fn view(&self, mode: DisplayMode) -> Value {
                match self {
                    Outcome::Lifecycle(l) => serde_json::to_value(l).expect("serializes"),
                    $(Outcome::$variant(o) => project(
                        serde_json::to_value(o).expect("outcomes serialize"),
                        mode,
                        <$play>::ANALYTIC_KEYS,
                    ),)*
                }
            }

            pub fn describe(&self, mode: DisplayMode) -> String {
                match self {
                    Outcome::Lifecycle(Lifecycle::Started) => "session started".to_string(),
                    Outcome::Lifecycle(Lifecycle::Finished) => "session finished".to_string(),
                    $(Outcome::$variant(o) => <$play>::describe(o, mode),)*
                }
            }
        }
    };
}

dispatch! {
    Cnn => CnnPlay,
    SurpriseBox => SurpriseBoxPlay,
    LittleTrainers => TrainersPlay,
    Predictors => PredictorsPlay,
    ClassroomSpotify => SpotifyPlay,
}

fn project(value: Value, mode: DisplayMode, keys: &[&str]) -> Value {
    match mode {
        DisplayMode::Teacher => value,
        DisplayMode::Student => strip_keys(value, keys),
    }
}

/// Removes every object entry named in `keys`, recursively.
pub fn strip_keys(value: Value, keys: &[&str]) -> Value {
    match value {
        Value::Object(map) => Value::Object(
            map.into_iter()
                .filter(|(k, _)| !keys.contains(&k.as_str()))
                .map(|(k, v)| (k, strip_keys(v, keys)))
                .collect(),
        ),
        Value::Array(items) => Value::Array(items.into_iter().map(|v| strip_keys(v, keys)).collect()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn strip_is_recursive() {
        let v = json!({"a": 1, "prob_major": 5, "nested": [{"prob_major": 3, "b": 2}]});
        assert_eq!(strip_keys(v, &["prob_major"]), json!({"a": 1, "nested": [{"b": 2}]}));
    }
}
