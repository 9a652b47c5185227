//! Lesson config files: `{game, seed, display_mode, payload}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::classroom_spotify::play::SpotifyPayload;
use crate::little_trainers::play::TrainersPayload;
use crate::predictors::play::PredictorsPayload;
use crate::surprise_box::play::BoxPayload;
use crate::threshold_network::play::CnnPayload;
use crate::validation::ValidationReport;

const TOP_LEVEL_FIELDS: &[&str] = &["game", "seed", "display_mode", "payload"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    Cnn,
    SurpriseBox,
    LittleTrainers,
    Predictors,
    ClassroomSpotify,
}

impl GameKind {
    pub const ALL: [GameKind; 5] = [
        GameKind::Cnn,
        GameKind::SurpriseBox,
        GameKind::LittleTrainers,
        GameKind::Predictors,
        GameKind::ClassroomSpotify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GameKind::Cnn => "cnn",
            GameKind::SurpriseBox => "surprise_box",
            GameKind::LittleTrainers => "little_trainers",
            GameKind::Predictors => "predictors",
            GameKind::ClassroomSpotify => "classroom_spotify",
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GameKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown game kind `{s}`"))
    }
}

/// Teacher display shows probabilities and analytics; student display hides
/// them and reads card chances as a difficulty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplayMode {
    #[default]
    Teacher,
    Student,
}

impl DisplayMode {
    /// The more restrictive of two modes.
    pub fn restrict(self, other: DisplayMode) -> DisplayMode {
        if self == DisplayMode::Student || other == DisplayMode::Student {
            DisplayMode::Student
        } else {
            DisplayMode::Teacher
        }
    }
}

impl FromStr for DisplayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "teacher" => Ok(DisplayMode::Teacher),
            "student" => Ok(DisplayMode::Student),
            other => Err(format!("unknown display mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum GamePayload {
    Cnn(CnnPayload),
    SurpriseBox(BoxPayload),
    LittleTrainers(TrainersPayload),
    Predictors(PredictorsPayload),
    ClassroomSpotify(SpotifyPayload),
}

impl GamePayload {
    pub fn kind(&self) -> GameKind {
        match self {
            GamePayload::Cnn(_) => GameKind::Cnn,
            GamePayload::SurpriseBox(_) => GameKind::SurpriseBox,
            GamePayload::LittleTrainers(_) => GameKind::LittleTrainers,
            GamePayload::Predictors(_) => GameKind::Predictors,
            GamePayload::ClassroomSpotify(_) => GameKind::ClassroomSpotify,
        }
    }

    fn parse(kind: GameKind, value: &Value) -> Result<Self, serde_json::Error> {
        let v = value.clone();
        Ok(match kind {
            GameKind::Cnn => GamePayload::Cnn(serde_json::from_value(v)?),
            GameKind::SurpriseBox => GamePayload::SurpriseBox(serde_json::from_value(v)?),
            GameKind::LittleTrainers => GamePayload::LittleTrainers(serde_json::from_value(v)?),
            GameKind::Predictors => GamePayload::Predictors(serde_json::from_value(v)?),
            GameKind::ClassroomSpotify => GamePayload::ClassroomSpotify(serde_json::from_value(v)?),
        })
    }

    fn known_fields(kind: GameKind) -> &'static [&'static str] {
        match kind {
            GameKind::Cnn => CnnPayload::FIELDS,
            GameKind::SurpriseBox => BoxPayload::FIELDS,
            GameKind::LittleTrainers => TrainersPayload::FIELDS,
            GameKind::Predictors => PredictorsPayload::FIELDS,
            GameKind::ClassroomSpotify => SpotifyPayload::FIELDS,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        match self {
            GamePayload::Cnn(p) => p.validate(),
            GamePayload::SurpriseBox(p) => p.validate(),
            GamePayload::LittleTrainers(p) => p.validate(),
            GamePayload::Predictors(p) => p.validate(),
            GamePayload::ClassroomSpotify(p) => p.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LessonConfig {
    pub game: GameKind,
    pub seed: u64,
    pub display_mode: DisplayMode,
    pub payload: GamePayload,
}

impl LessonConfig {
    pub fn new(seed: u64, display_mode: DisplayMode, payload: GamePayload) -> Self {
        LessonConfig {
            game: payload.kind(),
            seed,
            display_mode,
            payload,
        }
    }

    /// Parses and fully validates a config document. Warnings are allowed;
    /// any error rejects the document with the whole report.
    pub fn from_json(value: &Value) -> Result<(LessonConfig, ValidationReport), ValidationReport> {
        let (parsed, report) = parse(value);
        match parsed {
            Some(config) if !report.has_errors() => Ok((config, report)),
            _ => Err(report),
        }
    }

    pub fn from_str_json(text: &str) -> Result<(LessonConfig, ValidationReport), ValidationReport> {
        match serde_json::from_str::<Value>(text) {
            Ok(v) => Self::from_json(&v),
            Err(e) => {
                let mut report = ValidationReport::new();
                report.error("", format!("not valid JSON: {e}"));
                Err(report)
            }
        }
    }

    /// Semantic checks on an already-typed config.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if self.game != self.payload.kind() {
            report.error("payload", format!("payload does not belong to game `{}`", self.game));
        }
        report.merge("payload", self.payload.validate());
        report
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("configs serialize")
    }
}

impl<'de> Deserialize<'de> for LessonConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        LessonConfig::from_json(&value)
            .map(|(config, _)| config)
            .map_err(|report| serde::de::Error::custom(report.to_string().trim_end()))
    }
}

/// Static checks on a config document. An empty error list means
/// `Session::create` will accept it.
pub fn validate_config(value: &Value) -> ValidationReport {
    parse(value).1
}

fn parse(value: &Value) -> (Option<LessonConfig>, ValidationReport) {
    let mut report = ValidationReport::new();
    let Some(obj) = value.as_object() else {
        report.error("", "lesson config must be a JSON object");
        return (None, report);
    };
    warn_unknown(&mut report, "", obj, TOP_LEVEL_FIELDS);

    let game = match obj.get("game") {
        None => {
            report.error("game", "missing required field");
            None
        }
        Some(Value::String(s)) => match s.parse::<GameKind>() {
            Ok(kind) => Some(kind),
            Err(e) => {
                report.error("game", e);
                None
            }
        },
        Some(_) => {
            report.error("game", "must be a string");
            None
        }
    };

    let seed = match obj.get("seed") {
        None => {
            report.error("seed", "missing required field");
            None
        }
        Some(v) => match v.as_u64() {
            Some(seed) => Some(seed),
            None => {
                report.error("seed", "must be an unsigned 64-bit integer");
                None
            }
        },
    };

    let display_mode = match obj.get("display_mode") {
        None => Some(DisplayMode::Teacher),
        Some(Value::String(s)) => match s.parse::<DisplayMode>() {
            Ok(mode) => Some(mode),
            Err(e) => {
                report.error("display_mode", e);
                None
            }
        },
        Some(_) => {
            report.error("display_mode", "must be \"teacher\" or \"student\"");
            None
        }
    };

    let payload = match (game, obj.get("payload")) {
        (_, None) => {
            report.error("payload", "missing required field");
            None
        }
        (None, Some(_)) => None,
        (Some(kind), Some(raw)) => {
            if let Some(fields) = raw.as_object() {
                warn_unknown(&mut report, "payload", fields, GamePayload::known_fields(kind));
            }
            match GamePayload::parse(kind, raw) {
                Ok(p) => {
                    report.merge("payload", p.validate());
                    Some(p)
                }
                Err(e) => {
                    report.error("payload", e.to_string());
                    None
                }
            }
        }
    };

    let config = match (game, seed, display_mode, payload) {
        (Some(game), Some(seed), Some(display_mode), Some(payload)) => Some(LessonConfig {
            game,
            seed,
            display_mode,
            payload,
        }),
        _ => None,
    };
    (config, report)
}

fn warn_unknown(report: &mut ValidationReport, prefix: &str, obj: &Map<String, Value>, known: &[&str]) {
    for key in obj.keys() {
        if !known.contains(&key.as_str()) {
            let field = if prefix.is_empty() {
                key.clone()
            } else {
                format!("{prefix}.{key}")
            };
            report.warning(field, "unknown field is ignored");
        }
    }
}
