//! Supervised learning with data cards: a labeled deck, a one-nearest-
//! neighbour classifier over categorical features, and additive feedback.

pub mod play;

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Label = String;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrainerError {
    #[error("card `{0}` was already added with different features")]
    ConflictingCard(String),
    #[error("the training set is empty")]
    EmptyTrainingSet,
    #[error("invalid card `{id}`: {reason}")]
    InvalidCard { id: String, reason: String },
    #[error("label must not be empty")]
    EmptyLabel,
}

impl TrainerError {
    pub fn code(&self) -> &'static str {
        match self {
            TrainerError::ConflictingCard(_) => "conflicting-card",
            TrainerError::EmptyTrainingSet => "empty-training-set",
            TrainerError::InvalidCard { .. } => "invalid-card",
            TrainerError::EmptyLabel => "invalid-label",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataCard {
    pub id: String,
    pub features: BTreeMap<String, String>,
}

impl DataCard {
    pub fn new<K: Into<String>, V: Into<String>>(
        id: impl Into<String>,
        features: impl IntoIterator<Item = (K, V)>,
    ) -> Self {
        DataCard {
            id: id.into(),
            features: features
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    pub fn check(&self) -> Result<(), TrainerError> {
        let invalid = |reason: &str| TrainerError::InvalidCard {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.features.is_empty() {
            return Err(invalid("a card needs at least one feature"));
        }
        if self.features.keys().any(|k| k.trim().is_empty()) {
            return Err(invalid("feature names must not be empty"));
        }
        Ok(())
    }
}

/// Features named on either card whose values differ or which only one card
/// mentions.
pub fn mismatch_distance(a: &DataCard, b: &DataCard) -> usize {
    let names: BTreeSet<&String> = a.features.keys().chain(b.features.keys()).collect();
    names
        .into_iter()
        .filter(|name| a.features.get(*name) != b.features.get(*name))
        .count()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub card: DataCard,
    pub label: Label,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSet {
    examples: Vec<Example>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerUp {
    pub label: Label,
    pub mismatch_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub mismatch_count: usize,
    /// The training card that decided the label.
    pub nearest: String,
    pub runner_up: Option<RunnerUp>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    pub warning: Option<String>,
}

impl Evaluation {
    pub fn accuracy(&self) -> Ratio<usize> {
        if self.total == 0 {
            Ratio::from_integer(1)
        } else {
            Ratio::new(self.correct, self.total)
        }
    }
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.examples.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn add_example(&mut self, card: DataCard, label: impl Into<Label>) -> Result<(), TrainerError> {
        let label = label.into();
        card.check()?;
        if label.trim().is_empty() {
            return Err(TrainerError::EmptyLabel);
        }
        if self
            .examples
            .iter()
            .any(|e| e.card.id == card.id && e.card.features != card.features)
        {
            return Err(TrainerError::ConflictingCard(card.id));
        }
        self.examples.push(Example { card, label });
        Ok(())
    }

    /// Nearest example by mismatch distance. Ties on distance go to the
    /// label with more examples at that distance, then to the label whose
    /// first such example was added earliest.
    pub fn predict(&self, query: &DataCard) -> Result<Prediction, TrainerError> {
        if self.examples.is_empty() {
            return Err(TrainerError::EmptyTrainingSet);
        }
        let distances: Vec<usize> = self
            .examples
            .iter()
            .map(|e| mismatch_distance(query, &e.card))
            .collect();
        let best = *distances.iter().min().expect("non-empty");

        // label -> (supporters at best distance, first index at best distance)
        let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (i, e) in self.examples.iter().enumerate() {
            if distances[i] == best {
                let entry = tally.entry(e.label.as_str()).or_insert((0, i));
                entry.0 += 1;
            }
        }
        let (label, &(_, first)) = tally
            .iter()
            .max_by(|(_, (na, ia)), (_, (nb, ib))| na.cmp(nb).then(ib.cmp(ia)))
            .expect("at least one example at the best distance");

        let mut runner_up: Option<(usize, usize)> = None; // (distance, index)
        for (i, e) in self.examples.iter().enumerate() {
            if e.label == *label {
                continue;
            }
            if runner_up.is_none_or(|(d, _)| distances[i] < d) {
                runner_up = Some((distances[i], i));
            }
        }
        Ok(Prediction {
            label: label.to_string(),
            mismatch_count: best,
            nearest: self.examples[first].card.id.clone(),
            runner_up: runner_up.map(|(d, i)| RunnerUp {
                label: self.examples[i].label.clone(),
                mismatch_count: d,
            }),
        })
    }

    /// The referee's correction: the query joins the deck under its true
    /// label. Nothing is ever removed.
    pub fn feedback(&mut self, query: DataCard, true_label: impl Into<Label>) -> Result<(), TrainerError> {
        self.add_example(query, true_label)
    }

    pub fn evaluate(&self, tests: &[(DataCard, Label)]) -> Result<Evaluation, TrainerError> {
        if self.examples.is_empty() {
            return Err(TrainerError::EmptyTrainingSet);
        }
        let mut correct = 0;
        for (card, label) in tests {
            if self.predict(card)?.label == *label {
                correct += 1;
            }
        }
        Ok(Evaluation {
            correct,
            total: tests.len(),
            warning: tests
                .is_empty()
                .then(|| "no test cards: accuracy is vacuously 1".to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn card(id: &str, f: &[(&str, &str)]) -> DataCard {
        DataCard::new(id, f.iter().copied())
    }

    #[test]
    fn add_and_conflict() {
        let mut set = TrainingSet::new();
        set.add_example(card("dog1", &[("sound", "bark")]), "DOG").unwrap();
        assert_eq!(set.len(), 1);
        set.add_example(card("dog1", &[("sound", "bark")]), "DOG").unwrap();
        assert_eq!(
            set.add_example(card("dog1", &[("sound", "howl")]), "DOG"),
            Err(TrainerError::ConflictingCard("dog1".into()))
        );
        assert!(set.add_example(card("x", &[]), "DOG").is_err());
        assert_eq!(set.add_example(card("y", &[("a", "b")]), " "), Err(TrainerError::EmptyLabel));
    }

    #[test]
    fn distance_counts_absent_features() {
        let a = card("a", &[("ears", "pointed"), ("sound", "bark")]);
        let b = card("b", &[("ears", "pointed"), ("size", "large")]);
        assert_eq!(mismatch_distance(&a, &b), 2);
        assert_eq!(mismatch_distance(&a, &a), 0);
    }

    #[test]
    fn exact_match_wins() {
        let mut set = TrainingSet::new();
        set.add_example(card("d", &[("sound", "bark"), ("ears", "floppy")]), "DOG").unwrap();
        set.add_example(card("c", &[("sound", "meow"), ("ears", "pointed")]), "CAT").unwrap();
        let p = set.predict(&card("q", &[("sound", "meow"), ("ears", "pointed")])).unwrap();
        assert_eq!(p.label, "CAT");
        assert_eq!(p.mismatch_count, 0);
        assert_eq!(p.runner_up, Some(RunnerUp { label: "DOG".into(), mismatch_count: 2 }));
    }

    #[test]
    fn supporter_count_breaks_ties() {
        let mut set = TrainingSet::new();
        let f = [("sound", "howl")];
        set.add_example(card("w1", &f), "DOG").unwrap();
        set.add_example(card("w2", &f), "WOLF").unwrap();
        set.add_example(card("w3", &f), "WOLF").unwrap();
        let p = set.predict(&card("q", &f)).unwrap();
        assert_eq!(p.label, "WOLF");
        assert_eq!(p.nearest, "w2");
        // equal support: earliest wins
        let mut even = TrainingSet::new();
        even.add_example(card("w1", &f), "DOG").unwrap();
        even.add_example(card("w2", &f), "WOLF").unwrap();
        assert_eq!(even.predict(&card("q", &f)).unwrap().label, "DOG");
    }

    #[test]
    fn feedback_is_additive_and_corrects() {
        let mut set = TrainingSet::new();
        set.add_example(card("husky", &[("sound", "bark"), ("ears", "pointed")]), "DOG").unwrap();
        let wolf = card("wolf", &[("sound", "howl"), ("ears", "pointed")]);
        assert_eq!(set.predict(&wolf).unwrap().label, "DOG");
        let before = set.len();
        set.feedback(wolf.clone(), "WOLF").unwrap();
        assert_eq!(set.len(), before + 1);
        assert_eq!(set.predict(&wolf).unwrap().label, "WOLF");
    }

    #[test]
    fn evaluate_cases() {
        let mut set = TrainingSet::new();
        assert_eq!(set.evaluate(&[]), Err(TrainerError::EmptyTrainingSet));
        assert_eq!(set.predict(&card("q", &[("a", "b")])), Err(TrainerError::EmptyTrainingSet));
        set.add_example(card("a", &[("x", "1")]), "ONE").unwrap();
        set.add_example(card("b", &[("x", "2")]), "TWO").unwrap();
        let all: Vec<(DataCard, Label)> = set
            .examples()
            .iter()
            .map(|e| (e.card.clone(), e.label.clone()))
            .collect();
        assert_eq!(set.evaluate(&all).unwrap().accuracy(), Ratio::from_integer(1));
        let vacuous = set.evaluate(&[]).unwrap();
        assert_eq!(vacuous.accuracy(), Ratio::from_integer(1));
        assert!(vacuous.warning.is_some());
    }
}
