use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{predict_next, PatternSpec, PlanStep, SequencePrefix, Symbol};
use crate::session::{Actor, DisplayMode, Play, SessionError};
use crate::validation::ValidationReport;
use crate::SessionRng;

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorsPayload {
    pub blocks: Vec<Vec<Symbol>>,
    pub plan: Vec<PlanStep>,
    #[serde(default = "one")]
    pub reveal_up_to: usize,
}

impl PredictorsPayload {
    pub const FIELDS: &'static [&'static str] = &["blocks", "plan", "reveal_up_to"];

    pub fn spec(&self) -> PatternSpec {
        PatternSpec {
            blocks: self.blocks.clone(),
            plan: self.plan.clone(),
        }
    }

    /// Cards printed for the board: two full passes through the plan.
    pub fn material_length(&self) -> usize {
        self.spec().cycle().map_or(0, |c| 2 * c.len())
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if self.blocks.is_empty() {
            report.error("blocks", "at least one block of symbols is needed");
        }
        for (i, block) in self.blocks.iter().enumerate() {
            if block.is_empty() {
                report.warning(format!("blocks[{i}]"), "empty block contributes no cards");
            }
            for (j, s) in block.iter().enumerate() {
                if s.as_str().is_empty() {
                    report.error(format!("blocks[{i}][{j}]"), "symbol must not be empty");
                }
            }
        }
        if self.plan.is_empty() {
            report.error("plan", "the plan needs at least one step");
        }
        for (i, step) in self.plan.iter().enumerate() {
            if step.block >= self.blocks.len() {
                report.error(
                    format!("plan[{i}].block"),
                    format!("no block {} (there are {})", step.block, self.blocks.len()),
                );
            }
        }
        if !report.has_errors() && self.spec().cycle().is_err() {
            report.error("plan", "the pattern produces no symbols");
        }
        if self.reveal_up_to == 0 {
            report.error("reveal_up_to", "at least one card must be visible at the start");
        }
        report
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Guess {
    pub actor: String,
    pub symbol: Symbol,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GuessResult {
    pub actor: String,
    pub symbol: Symbol,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Reveal {
    pub index: usize,
    pub symbol: Symbol,
    /// What the minimal-period rule predicted for this position.
    pub naive_prediction: Symbol,
    pub predictor_correct: bool,
    /// The rule had a repeating pattern to go on and still got it wrong.
    pub surprise: bool,
    pub guesses: Vec<GuessResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictorsPlay {
    spec: PatternSpec,
    revealed: usize,
    guesses: Vec<Guess>,
    history: Vec<Reveal>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PredictorAction {
    Guess { symbol: Symbol },
    Reveal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PredictorOutcome {
    GuessRecorded { actor: String, index: usize },
    Revealed(Reveal),
}

impl PredictorsPlay {
    pub fn revealed(&self) -> usize {
        self.revealed
    }

    fn prefix(&self) -> SequencePrefix {
        self.spec.expand(self.revealed).expect("validated spec, revealed >= 1")
    }

    fn teacher_horizon(&self) -> usize {
        let cycle = self.spec.cycle().map_or(1, |c| c.len());
        (2 * cycle).max(self.revealed + cycle)
    }
}

impl Play for PredictorsPlay {
    type Payload = PredictorsPayload;
    type Action = PredictorAction;
    type Outcome = PredictorOutcome;

    const ANALYTIC_KEYS: &'static [&'static str] = &["upcoming", "surprise_point", "next_prediction"];

    fn init(payload: &PredictorsPayload) -> Self {
        PredictorsPlay {
            spec: payload.spec(),
            revealed: payload.reveal_up_to.max(1),
            guesses: Vec::new(),
            history: Vec::new(),
        }
    }

    fn apply(&mut self, actor: &Actor, action: PredictorAction, _rng: &mut SessionRng) -> Result<PredictorOutcome, SessionError> {
        match action {
            PredictorAction::Guess { symbol } => {
                if symbol.as_str().is_empty() {
                    return Err(SessionError::IllegalAction("a guess needs a symbol".into()));
                }
                let label = actor.label().to_string();
                self.guesses.retain(|g| g.actor != label);
                self.guesses.push(Guess {
                    actor: label.clone(),
                    symbol,
                });
                Ok(PredictorOutcome::GuessRecorded {
                    actor: label,
                    index: self.revealed,
                })
            }
            PredictorAction::Reveal => {
                actor.require_teacher("turn over the next card")?;
                let prefix = self.prefix();
                let naive = predict_next(&prefix);
                let period = super::minimal_period(prefix.symbols());
                let next = self.spec.expand(self.revealed + 1)?;
                let symbol = next.symbols()[self.revealed].clone();
                let predictor_correct = naive == symbol;
                let reveal = Reveal {
                    index: self.revealed,
                    symbol: symbol.clone(),
                    naive_prediction: naive,
                    predictor_correct,
                    surprise: !predictor_correct && period < prefix.len(),
                    guesses: self
                        .guesses
                        .drain(..)
                        .map(|g| GuessResult {
                            correct: g.symbol == symbol,
                            actor: g.actor,
                            symbol: g.symbol,
                        })
                        .collect(),
                };
                self.revealed += 1;
                self.history.push(reveal.clone());
                Ok(PredictorOutcome::Revealed(reveal))
            }
        }
    }

    fn view(&self) -> Value {
        let prefix = self.prefix();
        let horizon = self.teacher_horizon();
        let upcoming: Vec<Symbol> = self
            .spec
            .expand(horizon)
            .map(|s| s.symbols()[self.revealed.min(horizon)..].to_vec())
            .unwrap_or_default();
        json!({
            "revealed": prefix.symbols(),
            "revealed_count": self.revealed,
            "pending_guesses": self.guesses,
            "history": self.history,
            "next_prediction": predict_next(&prefix),
            "upcoming": upcoming,
            "surprise_point": self.spec.surprise_point(horizon).ok().flatten(),
        })
    }

    fn describe(outcome: &PredictorOutcome, _mode: DisplayMode) -> String {
        match outcome {
            PredictorOutcome::GuessRecorded { actor, index } => format!("{actor} guesses card {}", index + 1),
            PredictorOutcome::Revealed(r) => {
                let right: Vec<&str> = r.guesses.iter().filter(|g| g.correct).map(|g| g.actor.as_str()).collect();
                let mut s = format!(
                    "card {} is {} (pattern said {}{})",
                    r.index + 1,
                    r.symbol,
                    r.naive_prediction,
                    if r.surprise { ": surprise!" } else { "" }
                );
                if !r.guesses.is_empty() {
                    s.push_str(&format!("; right: {}", if right.is_empty() { "nobody".to_string() } else { right.join(", ") }));
                }
                s
            }
        }
    }
}
