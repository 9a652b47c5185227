//! Pattern prediction: minimal-period inference over an observed prefix,
//! teacher-designed sequences with scheduled pattern breaks, and the index
//! where the naive predictor first gets it wrong.

pub mod play;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(pub String);

impl Symbol {
    pub fn new(token: impl Into<String>) -> Self {
        Symbol(token.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol(s.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PredictorError {
    #[error("the pattern produces no symbols")]
    EmptySpec,
    #[error("plan step {step} refers to block {block}, but there are only {blocks} blocks")]
    BadBlockIndex {
        step: usize,
        block: usize,
        blocks: usize,
    },
    #[error("a prefix needs at least one symbol")]
    EmptyPrefix,
}

impl PredictorError {
    pub fn code(&self) -> &'static str {
        match self {
            PredictorError::EmptySpec | PredictorError::BadBlockIndex { .. } => "empty-spec",
            PredictorError::EmptyPrefix => "empty-prefix",
        }
    }
}

/// Non-empty observed sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Symbol>", into = "Vec<Symbol>")]
pub struct SequencePrefix(Vec<Symbol>);

impl TryFrom<Vec<Symbol>> for SequencePrefix {
    type Error = PredictorError;

    fn try_from(symbols: Vec<Symbol>) -> Result<Self, Self::Error> {
        if symbols.is_empty() {
            Err(PredictorError::EmptyPrefix)
        } else {
            Ok(SequencePrefix(symbols))
        }
    }
}

impl From<SequencePrefix> for Vec<Symbol> {
    fn from(p: SequencePrefix) -> Self {
        p.0
    }
}

impl SequencePrefix {
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, PredictorError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        tokens
            .into_iter()
            .map(|t| Symbol(t.into()))
            .collect::<Vec<_>>()
            .try_into()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Smallest `p >= 1` with `s[i] == s[i - p]` for every `i >= p`; the prefix
/// length when nothing shorter works. Computed as length minus the longest
/// proper border.
pub fn minimal_period(symbols: &[Symbol]) -> usize {
    let border = prefix_function(symbols).last().copied().unwrap_or(0);
    symbols.len() - border
}

fn prefix_function<T: PartialEq>(s: &[T]) -> Vec<usize> {
    let mut pi = vec![0usize; s.len()];
    for i in 1..s.len() {
        let mut k = pi[i - 1];
        while k > 0 && s[i] != s[k] {
            k = pi[k - 1];
        }
        if s[i] == s[k] {
            k += 1;
        }
        pi[i] = k;
    }
    pi
}

/// Continuation under the minimal-period hypothesis.
pub fn predict_next(prefix: &SequencePrefix) -> Symbol {
    let s = prefix.symbols();
    s[s.len() - minimal_period(s)].clone()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub block: usize,
    pub repeat: usize,
}

/// Blocks of symbols and a plan of `(block, repeat)` steps; the full
/// sequence is the plan's concatenation, cycled forever.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub blocks: Vec<Vec<Symbol>>,
    pub plan: Vec<PlanStep>,
}

impl PatternSpec {
    /// `[@, ☺, $]` twice then `[1, 2, 3]` once, cycled.
    pub fn demo() -> Self {
        let block = |tokens: &[&str]| tokens.iter().map(|&t| Symbol::from(t)).collect();
        PatternSpec {
            blocks: vec![block(&["@", "☺", "$"]), block(&["1", "2", "3"])],
            plan: vec![
                PlanStep { block: 0, repeat: 2 },
                PlanStep { block: 1, repeat: 1 },
            ],
        }
    }

    /// One pass through the plan.
    pub fn cycle(&self) -> Result<Vec<Symbol>, PredictorError> {
        let mut out = Vec::new();
        for (step, p) in self.plan.iter().enumerate() {
            let block = self.blocks.get(p.block).ok_or(PredictorError::BadBlockIndex {
                step,
                block: p.block,
                blocks: self.blocks.len(),
            })?;
            for _ in 0..p.repeat {
                out.extend(block.iter().cloned());
            }
        }
        if out.is_empty() {
            return Err(PredictorError::EmptySpec);
        }
        Ok(out)
    }

    pub fn expand(&self, length: usize) -> Result<SequencePrefix, PredictorError> {
        let cycle = self.cycle()?;
        let symbols: Vec<Symbol> = cycle.iter().cycle().take(length).cloned().collect();
        symbols.try_into()
    }

    /// First `k < horizon` where the minimal-period guess after seeing `k`
    /// symbols is wrong about symbol `k`. Only guesses backed by at least one
    /// observed repetition (period shorter than the prefix) count; before
    /// that the students have no pattern to commit to.
    pub fn surprise_point(&self, horizon: usize) -> Result<Option<usize>, PredictorError> {
        let cycle = self.cycle()?;
        let sequence: Vec<Symbol> = cycle.iter().cycle().take(horizon).cloned().collect();
        let pi = prefix_function(&sequence);
        for k in 1..horizon {
            let period = k - pi[k - 1];
            if period < k && sequence[k - period] != sequence[k] {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(tokens: &[&str]) -> SequencePrefix {
        SequencePrefix::from_tokens(tokens.iter().copied()).unwrap()
    }

    #[test]
    fn period_examples() {
        assert_eq!(minimal_period(seq(&["@", "☺", "$", "@", "☺", "$"]).symbols()), 3);
        assert_eq!(minimal_period(seq(&["x"]).symbols()), 1);
        assert_eq!(minimal_period(seq(&["a", "b", "a"]).symbols()), 2);
        assert_eq!(minimal_period(seq(&["a", "b", "c"]).symbols()), 3);
    }

    #[test]
    fn next_symbol_examples() {
        assert_eq!(predict_next(&seq(&["@", "☺", "$", "@", "☺", "$"])), Symbol::from("@"));
        assert_eq!(
            predict_next(&seq(&["@", "☺", "$", "@", "☺", "$", "1", "2", "3"])),
            Symbol::from("@")
        );
        assert_eq!(predict_next(&seq(&["a", "a", "a"])), Symbol::from("a"));
    }

    #[test]
    fn demo_expansion() {
        let got = PatternSpec::demo().expand(18).unwrap();
        let tokens: Vec<&str> = got.symbols().iter().map(Symbol::as_str).collect();
        assert_eq!(
            tokens,
            ["@", "☺", "$", "@", "☺", "$", "1", "2", "3", "@", "☺", "$", "@", "☺", "$", "1", "2", "3"]
        );
        assert_eq!(PatternSpec::demo().expand(1).unwrap().symbols(), [Symbol::from("@")]);
    }

    #[test]
    fn demo_surprise_at_six() {
        assert_eq!(PatternSpec::demo().surprise_point(18).unwrap(), Some(6));
        assert_eq!(PatternSpec::demo().surprise_point(6).unwrap(), None);
    }

    #[test]
    fn single_block_never_surprises() {
        let spec = PatternSpec {
            blocks: vec![vec!["a".into(), "b".into()]],
            plan: vec![PlanStep { block: 0, repeat: 1 }],
        };
        for horizon in 4..30 {
            assert_eq!(spec.surprise_point(horizon).unwrap(), None);
        }
    }

    #[test]
    fn empty_specs() {
        let empty = PatternSpec { blocks: vec![vec![]], plan: vec![PlanStep { block: 0, repeat: 3 }] };
        assert_eq!(empty.expand(3), Err(PredictorError::EmptySpec));
        let no_plan = PatternSpec { blocks: vec![vec!["a".into()]], plan: vec![] };
        assert_eq!(no_plan.surprise_point(4), Err(PredictorError::EmptySpec));
        let bad = PatternSpec { blocks: vec![], plan: vec![PlanStep { block: 2, repeat: 1 }] };
        assert!(matches!(bad.cycle(), Err(PredictorError::BadBlockIndex { .. })));
        assert_eq!(PatternSpec::demo().expand(0), Err(PredictorError::EmptyPrefix));
    }

    #[test]
    fn prefix_rejects_empty() {
        assert!(serde_json::from_str::<SequencePrefix>("[]").is_err());
        let p: SequencePrefix = serde_json::from_str(r#"["a","b"]"#).unwrap();
        assert_eq!(p.len(), 2);
    }
}
