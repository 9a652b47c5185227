//! Two boxes, one major and one minor prize, and purchasable information
//! cards that shift the odds. All scoring is exact rational arithmetic.

pub mod play;

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::SessionRng;

/// Exact point values.
pub type Points = Ratio<i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BoxId {
    #[serde(alias = "a")]
    A,
    #[serde(alias = "b")]
    B,
}

impl BoxId {
    pub fn other(self) -> BoxId {
        match self {
            BoxId::A => BoxId::B,
            BoxId::B => BoxId::A,
        }
    }
}

impl fmt::Display for BoxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxId::A => "A",
            BoxId::B => "B",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SurpriseBoxError {
    #[error("no cards left in the box {0} set")]
    EmptyCardSet(BoxId),
    #[error("wrong phase: expected {expected}, round is in {actual}")]
    WrongPhase {
        expected: RoundPhase,
        actual: RoundPhase,
    },
    #[error("the prize assignment has not been drawn yet")]
    AssignmentNotDrawn,
}

impl SurpriseBoxError {
    pub fn code(&self) -> &'static str {
        match self {
            SurpriseBoxError::EmptyCardSet(_) => "empty-card-set",
            SurpriseBoxError::WrongPhase { .. } => "wrong-phase",
            SurpriseBoxError::AssignmentNotDrawn => "illegal-action",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prizes {
    pub major: i64,
    pub minor: i64,
}

impl Default for Prizes {
    fn default() -> Self {
        Prizes {
            major: 100,
            minor: 30,
        }
    }
}

/// A probability in `[0, 1]`, kept exact. Deserializes from a JSON number
/// by reading its decimal digits, so `0.3` is exactly `3/10`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Probability(Ratio<i64>);

impl Probability {
    pub fn new(value: Ratio<i64>) -> Option<Self> {
        (value >= Ratio::zero() && value <= Ratio::one()).then_some(Probability(value))
    }

    pub fn percent(p: u32) -> Option<Self> {
        Self::new(Ratio::new(i64::from(p), 100))
    }

    pub fn half() -> Self {
        Probability(Ratio::new(1, 2))
    }

    pub fn value(self) -> Ratio<i64> {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(Ratio::one() - self.0)
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl Default for Probability {
    fn default() -> Self {
        Probability::half()
    }
}

impl FromStr for Probability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ratio = parse_decimal(s).ok_or_else(|| format!("`{s}` is not a decimal number"))?;
        Probability::new(ratio).ok_or_else(|| format!("probability {s} is outside [0, 1]"))
    }
}

fn parse_decimal(s: &str) -> Option<Ratio<i64>> {
    let s = s.trim();
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    if !all.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mut numer: i64 = if all.is_empty() { 0 } else { all.parse().ok()? };
    let scale = exponent - frac_part.len() as i32;
    let mut denom: i64 = 1;
    if scale >= 0 {
        numer = numer.checked_mul(10i64.checked_pow(scale as u32)?)?;
    } else {
        denom = 10i64.checked_pow((-scale) as u32)?;
    }
    if negative {
        numer = -numer;
    }
    Some(Ratio::new(numer, denom))
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Probability {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let number = serde_json::Number::deserialize(deserializer)?;
        number.to_string().parse().map_err(serde::de::Error::custom)
    }
}

/// An information card: costs `cost` points and states a `prob_major`
/// percent chance that `about_box` holds the major prize.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoCard {
    pub id: String,
    pub about_box: BoxId,
    pub cost: i64,
    pub prob_major: u32,
}

impl InfoCard {
    pub fn new(id: impl Into<String>, about_box: BoxId, cost: i64, prob_major: u32) -> Self {
        InfoCard {
            id: id.into(),
            about_box,
            cost,
            prob_major,
        }
    }

    /// Card notation with cost as subscript and chance as superscript.
    pub fn notation(&self) -> String {
        format!("{}_{}^{}", self.id, self.cost, self.prob_major)
    }
}

/// The two card sets from the lesson, box A then box B.
pub fn demo_cards() -> (Vec<InfoCard>, Vec<InfoCard>) {
    let a = vec![
        InfoCard::new("A", BoxId::A, 20, 10),
        InfoCard::new("B", BoxId::A, 30, 20),
        InfoCard::new("C", BoxId::A, 5, 5),
        InfoCard::new("D", BoxId::A, 85, 40),
    ];
    let b = vec![
        InfoCard::new("E", BoxId::B, 10, 50),
        InfoCard::new("F", BoxId::B, 10, 10),
        InfoCard::new("G", BoxId::B, 20, 30),
        InfoCard::new("H", BoxId::B, 5, 5),
    ];
    (a, b)
}

/// Belief about where the major prize is. Exactly one box holds it, so the
/// probability for B is always the complement of A.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Belief {
    pub major_in_a: Probability,
}

impl Belief {
    pub fn uniform() -> Self {
        Belief {
            major_in_a: Probability::half(),
        }
    }

    pub fn certain(location: BoxId) -> Self {
        let p = if location == BoxId::A { 1 } else { 0 };
        Belief {
            major_in_a: Probability(Ratio::from_integer(p)),
        }
    }

    pub fn major_in(&self, b: BoxId) -> Probability {
        match b {
            BoxId::A => self.major_in_a,
            BoxId::B => self.major_in_a.complement(),
        }
    }
}

pub fn posterior(card: &InfoCard) -> Belief {
    let p = Probability::percent(card.prob_major.min(100)).unwrap_or_default();
    Belief {
        major_in_a: match card.about_box {
            BoxId::A => p,
            BoxId::B => p.complement(),
        },
    }
}

impl Prizes {
    pub fn prize(&self, chosen: BoxId, major_box: BoxId) -> i64 {
        if chosen == major_box {
            self.major
        } else {
            self.minor
        }
    }

    pub fn expected_points(&self, belief: &Belief, chosen: BoxId, sunk_cost: i64) -> Points {
        let p = belief.major_in(chosen).value();
        p * self.major + (Ratio::one() - p) * self.minor - sunk_cost
    }

    /// Box with the higher expected points; ties go to A.
    pub fn best_action(&self, belief: &Belief, sunk_cost: i64) -> (BoxId, Points) {
        let a = self.expected_points(belief, BoxId::A, sunk_cost);
        let b = self.expected_points(belief, BoxId::B, sunk_cost);
        if b > a {
            (BoxId::B, b)
        } else {
            (BoxId::A, a)
        }
    }

    /// Gain from buying `card` and acting on it, net of its cost, over acting
    /// on the prior alone. Negative when the card costs more than it helps.
    pub fn value_of_information(&self, card: &InfoCard, prior: &Belief) -> Points {
        let (_, with_card) = self.best_action(&posterior(card), card.cost);
        let (_, without) = self.best_action(prior, 0);
        with_card - without
    }
}

/// Uniform draw without replacement.
pub fn draw_card(deck: &mut Vec<InfoCard>, side: BoxId, rng: &mut SessionRng) -> Result<InfoCard, SurpriseBoxError> {
    if deck.is_empty() {
        return Err(SurpriseBoxError::EmptyCardSet(side));
    }
    let index = rng.random_range(0..deck.len());
    Ok(deck.remove(index))
}

/// Places the major prize according to `belief`, exactly.
pub fn draw_assignment(belief: &Belief, rng: &mut SessionRng) -> BoxId {
    let p = belief.major_in_a.value();
    let roll = rng.random_range(0..*p.denom());
    if roll < *p.numer() {
        BoxId::A
    } else {
        BoxId::B
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundPhase {
    DecidingPurchase,
    ChoosingBox,
    Revealed,
}

impl fmt::Display for RoundPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoundPhase::DecidingPurchase => "deciding_purchase",
            RoundPhase::ChoosingBox => "choosing_box",
            RoundPhase::Revealed => "revealed",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerRound {
    pub player: String,
    pub purchased_card: Option<InfoCard>,
    pub chosen_box: Option<BoxId>,
    pub points_awarded: Option<i64>,
    pub phase: RoundPhase,
}

impl PlayerRound {
    pub fn new(player: impl Into<String>) -> Self {
        PlayerRound {
            player: player.into(),
            purchased_card: None,
            chosen_box: None,
            points_awarded: None,
            phase: RoundPhase::DecidingPurchase,
        }
    }

    pub fn card_cost(&self) -> i64 {
        self.purchased_card.as_ref().map_or(0, |c| c.cost)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxWorld {
    pub prizes: Prizes,
    pub prior_major_in_a: Probability,
    pub hidden_assignment: Option<BoxId>,
}

/// Opens `chosen` and scores the round: prize minus the card cost.
pub fn resolve_open(world: &BoxWorld, mut round: PlayerRound, chosen: BoxId) -> Result<PlayerRound, SurpriseBoxError> {
    if round.phase != RoundPhase::ChoosingBox {
        return Err(SurpriseBoxError::WrongPhase {
            expected: RoundPhase::ChoosingBox,
            actual: round.phase,
        });
    }
    let major_box = world
        .hidden_assignment
        .ok_or(SurpriseBoxError::AssignmentNotDrawn)?;
    round.chosen_box = Some(chosen);
    round.points_awarded = Some(world.prizes.prize(chosen, major_box) - round.card_cost());
    round.phase = RoundPhase::Revealed;
    Ok(round)
}

/// How the chance is read aloud in student display: a higher chance means
/// the prize is easier to find.
pub fn difficulty(prob_major: u32) -> &'static str {
    match prob_major {
        0..=19 => "very hard",
        20..=39 => "hard",
        40..=60 => "medium",
        61..=80 => "easy",
        _ => "very easy",
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CardAnalysis {
    pub card: String,
    pub posterior_best_box: BoxId,
    #[serde(serialize_with = "serialize_points")]
    pub ev: Points,
    #[serde(serialize_with = "serialize_points")]
    pub voi: Points,
}

pub fn card_table(prizes: &Prizes, prior: &Belief, cards: &[InfoCard]) -> Vec<CardAnalysis> {
    cards
        .iter()
        .map(|card| {
            let (best, ev) = prizes.best_action(&posterior(card), card.cost);
            CardAnalysis {
                card: card.id.clone(),
                posterior_best_box: best,
                ev,
                voi: prizes.value_of_information(card, prior),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub rounds: u64,
    pub mean: f64,
    pub std_err: f64,
}

/// Plays `rounds` rounds of one player holding `card` (or none), choosing
/// the best box for their belief each time, and returns the empirical
/// points. The major prize is placed according to that same belief.
pub fn simulate_rounds(
    world: &BoxWorld,
    card: Option<&InfoCard>,
    rounds: u64,
    rng: &mut SessionRng,
) -> MonteCarloSummary {
    let prior = Belief {
        major_in_a: world.prior_major_in_a,
    };
    let belief = card.map_or(prior, posterior);
    let cost = card.map_or(0, |c| c.cost);
    let (choice, _) = world.prizes.best_action(&belief, cost);
    let mut sum = 0f64;
    let mut sum_sq = 0f64;
    for _ in 0..rounds {
        let mut round = PlayerRound::new("sim");
        round.purchased_card = card.cloned();
        round.phase = RoundPhase::ChoosingBox;
        let placed = BoxWorld {
            hidden_assignment: Some(draw_assignment(&belief, rng)),
            ..world.clone()
        };
        let points = resolve_open(&placed, round, choice)
            .ok()
            .and_then(|r| r.points_awarded)
            .unwrap_or(0) as f64;
        sum += points;
        sum_sq += points * points;
    }
    if rounds == 0 {
        return MonteCarloSummary {
            rounds,
            mean: 0.0,
            std_err: 0.0,
        };
    }
    let n = rounds as f64;
    let mean = sum / n;
    let variance = if rounds > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    MonteCarloSummary {
        rounds,
        mean,
        std_err: (variance / n).sqrt(),
    }
}

/// Decimal when the value terminates within six places, `n/d` otherwise.
pub fn format_points(p: &Points) -> String {
    if p.is_integer() {
        return p.numer().to_string();
    }
    let mut scaled = *p;
    for places in 1..=6 {
        scaled = scaled * 10;
        if scaled.is_integer() {
            let digits = scaled.numer().abs().to_string();
            let digits = format!("{digits:0>width$}", width = places + 1);
            let (int_part, frac_part) = digits.split_at(digits.len() - places);
            let sign = if p.is_negative() { "-" } else { "" };
            return format!("{sign}{int_part}.{frac_part}");
        }
    }
    format!("{}/{}", p.numer(), p.denom())
}

pub fn serialize_points<S: Serializer>(p: &Points, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_f64(*p.numer() as f64 / *p.denom() as f64)
}
