use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{DataCard, Label, Prediction, TrainerError, TrainingSet};
use crate::session::{Actor, DisplayMode, Play, SessionError};
use crate::validation::ValidationReport;
use crate::SessionRng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCard {
    pub id: String,
    pub features: BTreeMap<String, String>,
    pub label: Label,
}

impl LabeledCard {
    pub fn card(&self) -> DataCard {
        DataCard {
            id: self.id.clone(),
            features: self.features.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainersPayload {
    pub features: Vec<String>,
    #[serde(default)]
    pub examples: Vec<LabeledCard>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<LabeledCard>,
}

impl TrainersPayload {
    pub const FIELDS: &'static [&'static str] = &["features", "examples", "tests"];

    pub fn training_set(&self) -> Result<TrainingSet, TrainerError> {
        let mut set = TrainingSet::new();
        for e in &self.examples {
            set.add_example(e.card(), e.label.clone())?;
        }
        Ok(set)
    }

    pub fn test_pairs(&self) -> Vec<(DataCard, Label)> {
        self.tests.iter().map(|t| (t.card(), t.label.clone())).collect()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if self.features.is_empty() {
            report.error("features", "declare at least one feature");
        }
        let mut declared = BTreeSet::new();
        for (i, f) in self.features.iter().enumerate() {
            if f.trim().is_empty() {
                report.error(format!("features[{i}]"), "feature name must not be empty");
            }
            if !declared.insert(f.as_str()) {
                report.error(format!("features[{i}]"), format!("duplicate feature `{f}`"));
            }
        }
        let check = |list: &str, cards: &[LabeledCard], report: &mut ValidationReport| {
            for (i, c) in cards.iter().enumerate() {
                let field = format!("{list}[{i}]");
                if let Err(e) = c.card().check() {
                    report.error(&field, e.to_string());
                }
                if c.label.trim().is_empty() {
                    report.error(format!("{field}.label"), "label must not be empty");
                }
                for name in c.features.keys() {
                    if !declared.contains(name.as_str()) {
                        report.error(format!("{field}.features.{name}"), "feature is not declared");
                    }
                }
            }
        };
        check("examples", &self.examples, &mut report);
        check("tests", &self.tests, &mut report);
        let mut seen: BTreeMap<&str, &BTreeMap<String, String>> = BTreeMap::new();
        for (i, e) in self.examples.iter().enumerate() {
            if let Some(prev) = seen.insert(&e.id, &e.features) {
                if prev != &e.features {
                    report.error(
                        format!("examples[{i}]"),
                        format!("card `{}` was already added with different features", e.id),
                    );
                }
            }
        }
        report
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerPhase {
    /// Group A shows labeled cards.
    Training,
    /// Group C brings new cards for the model (Group B) to classify.
    Testing,
    /// Group D judges the model's last answer.
    AwaitingFeedback,
}

impl fmt::Display for TrainerPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainerPhase::Training => "training",
            TrainerPhase::Testing => "testing",
            TrainerPhase::AwaitingFeedback => "awaiting_feedback",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PendingQuery {
    pub tester: String,
    pub card: DataCard,
    pub prediction: Prediction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QueryRecord {
    pub card: String,
    pub predicted: Label,
    pub correct: bool,
    pub true_label: Option<Label>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainersPlay {
    features: Vec<String>,
    set: TrainingSet,
    tests: Vec<(DataCard, Label)>,
    phase: TrainerPhase,
    pending: Option<PendingQuery>,
    history: Vec<QueryRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrainerAction {
    AddExample { card: DataCard, label: Label },
    StartTesting,
    StartTraining,
    Query { card: DataCard },
    Feedback {
        correct: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<Label>,
    },
    Evaluate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrainerOutcome {
    ExampleAdded { card: String, label: Label, size: usize },
    PhaseChanged { phase: TrainerPhase },
    Predicted { card: String, prediction: Prediction },
    FeedbackRecorded {
        correct: bool,
        true_label: Label,
        size: usize,
        /// The model's answer for the same card after learning from it.
        now_predicts: Option<Label>,
    },
    Evaluated {
        correct: usize,
        total: usize,
        accuracy: String,
        warning: Option<String>,
    },
}

impl TrainersPlay {
    pub fn training_set(&self) -> &TrainingSet {
        &self.set
    }

    pub fn phase(&self) -> TrainerPhase {
        self.phase
    }

    fn expect_phase(&self, expected: TrainerPhase) -> Result<(), SessionError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(SessionError::wrong_phase(expected, self.phase))
        }
    }

    fn check_declared(&self, card: &DataCard) -> Result<(), TrainerError> {
        card.check()?;
        match card.features.keys().find(|k| !self.features.contains(k)) {
            Some(unknown) => Err(TrainerError::InvalidCard {
                id: card.id.clone(),
                reason: format!("feature `{unknown}` is not declared for this lesson"),
            }),
            None => Ok(()),
        }
    }
}

impl Play for TrainersPlay {
    type Payload = TrainersPayload;
    type Action = TrainerAction;
    type Outcome = TrainerOutcome;

    const ANALYTIC_KEYS: &'static [&'static str] = &[];

    fn init(payload: &TrainersPayload) -> Self {
        TrainersPlay {
            features: payload.features.clone(),
            set: payload.training_set().unwrap_or_default(),
            tests: payload.test_pairs(),
            phase: TrainerPhase::Training,
            pending: None,
            history: Vec::new(),
        }
    }

    fn apply(&mut self, actor: &Actor, action: TrainerAction, _rng: &mut SessionRng) -> Result<TrainerOutcome, SessionError> {
        match action {
            TrainerAction::AddExample { card, label } => {
                self.expect_phase(TrainerPhase::Training)?;
                self.check_declared(&card)?;
                let id = card.id.clone();
                self.set.add_example(card, label.clone())?;
                Ok(TrainerOutcome::ExampleAdded {
                    card: id,
                    label,
                    size: self.set.len(),
                })
            }
            TrainerAction::StartTesting => {
                actor.require_teacher("change the phase")?;
                self.expect_phase(TrainerPhase::Training)?;
                if self.set.is_empty() {
                    return Err(TrainerError::EmptyTrainingSet.into());
                }
                self.phase = TrainerPhase::Testing;
                Ok(TrainerOutcome::PhaseChanged { phase: self.phase })
            }
            TrainerAction::StartTraining => {
                actor.require_teacher("change the phase")?;
                self.expect_phase(TrainerPhase::Testing)?;
                self.phase = TrainerPhase::Training;
                Ok(TrainerOutcome::PhaseChanged { phase: self.phase })
            }
            TrainerAction::Query { card } => {
                self.expect_phase(TrainerPhase::Testing)?;
                self.check_declared(&card)?;
                let prediction = self.set.predict(&card)?;
                self.pending = Some(PendingQuery {
                    tester: actor.label().to_string(),
                    card: card.clone(),
                    prediction: prediction.clone(),
                });
                self.phase = TrainerPhase::AwaitingFeedback;
                Ok(TrainerOutcome::Predicted {
                    card: card.id,
                    prediction,
                })
            }
            TrainerAction::Feedback { correct, label } => {
                self.expect_phase(TrainerPhase::AwaitingFeedback)?;
                let pending = self.pending.take().expect("pending query in feedback phase");
                let predicted = pending.prediction.label.clone();
                let (true_label, now_predicts) = if correct {
                    (predicted.clone(), None)
                } else {
                    let label = label
                        .filter(|l| !l.trim().is_empty())
                        .ok_or_else(|| SessionError::IllegalAction("a wrong answer needs the true label".into()))?;
                    self.set.feedback(pending.card.clone(), label.clone())?;
                    let now = self.set.predict(&pending.card)?.label;
                    (label, Some(now))
                };
                self.history.push(QueryRecord {
                    card: pending.card.id.clone(),
                    predicted,
                    correct,
                    true_label: (!correct).then(|| true_label.clone()),
                });
                self.phase = TrainerPhase::Testing;
                Ok(TrainerOutcome::FeedbackRecorded {
                    correct,
                    true_label,
                    size: self.set.len(),
                    now_predicts,
                })
            }
            TrainerAction::Evaluate => {
                actor.require_teacher("evaluate the model")?;
                let eval = self.set.evaluate(&self.tests)?;
                let acc = eval.accuracy();
                Ok(TrainerOutcome::Evaluated {
                    correct: eval.correct,
                    total: eval.total,
                    accuracy: format!("{}/{}", acc.numer(), acc.denom()),
                    warning: eval.warning,
                })
            }
        }
    }

    fn view(&self) -> Value {
        json!({
            "phase": self.phase,
            "features": self.features,
            "examples": self.set.examples(),
            "labels": self.set.labels(),
            "pending": self.pending,
            "history": self.history,
            "test_cards": self.tests.len(),
        })
    }

    fn describe(outcome: &TrainerOutcome, _mode: DisplayMode) -> String {
        match outcome {
            TrainerOutcome::ExampleAdded { card, label, size } => {
                format!("card {card} labeled {label} ({size} examples)")
            }
            TrainerOutcome::PhaseChanged { phase } => format!("phase: {phase}"),
            TrainerOutcome::Predicted { card, prediction } => format!(
                "model says {card} is {} (nearest {}, {} mismatches)",
                prediction.label, prediction.nearest, prediction.mismatch_count
            ),
            TrainerOutcome::FeedbackRecorded { correct: true, true_label, .. } => {
                format!("referees: YES, it is {true_label}")
            }
            TrainerOutcome::FeedbackRecorded {
                true_label,
                size,
                now_predicts,
                ..
            } => format!(
                "referees: NOT, it is {true_label}; card added ({size} examples), model now says {}",
                now_predicts.as_deref().unwrap_or("?")
            ),
            TrainerOutcome::Evaluated {
                correct,
                total,
                accuracy,
                warning,
            } => {
                let mut s = format!("accuracy {accuracy} ({correct} of {total})");
                if let Some(w) = warning {
                    s.push_str(&format!(" [warning: {w}]"));
                }
                s
            }
        }
    }
}
