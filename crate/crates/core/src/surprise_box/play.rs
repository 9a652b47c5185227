use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    card_table, difficulty, draw_assignment, draw_card, format_points, posterior, resolve_open, serialize_points,
    Belief, BoxId, BoxWorld, InfoCard, PlayerRound, Points, Prizes, Probability, RoundPhase, SurpriseBoxError,
};
use crate::session::{Actor, DisplayMode, Play, SessionError};
use crate::validation::ValidationReport;
use crate::SessionRng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardSpec {
    pub id: String,
    pub cost: i64,
    pub prob_major: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxPayload {
    #[serde(default)]
    pub prizes: Prizes,
    #[serde(default, rename = "prior_major_in_A")]
    pub prior_major_in_a: Probability,
    #[serde(default)]
    pub cards_a: Vec<CardSpec>,
    #[serde(default)]
    pub cards_b: Vec<CardSpec>,
}

impl BoxPayload {
    pub const FIELDS: &'static [&'static str] = &["prizes", "prior_major_in_A", "cards_a", "cards_b"];

    pub fn demo() -> Self {
        let (a, b) = super::demo_cards();
        let spec = |c: &InfoCard| CardSpec {
            id: c.id.clone(),
            cost: c.cost,
            prob_major: c.prob_major,
        };
        BoxPayload {
            prizes: Prizes::default(),
            prior_major_in_a: Probability::half(),
            cards_a: a.iter().map(spec).collect(),
            cards_b: b.iter().map(spec).collect(),
        }
    }

    pub fn cards(&self, side: BoxId) -> Vec<InfoCard> {
        let specs = match side {
            BoxId::A => &self.cards_a,
            BoxId::B => &self.cards_b,
        };
        specs
            .iter()
            .map(|c| InfoCard::new(c.id.clone(), side, c.cost, c.prob_major))
            .collect()
    }

    pub fn all_cards(&self) -> Vec<InfoCard> {
        let mut cards = self.cards(BoxId::A);
        cards.extend(self.cards(BoxId::B));
        cards
    }

    pub fn prior(&self) -> Belief {
        Belief {
            major_in_a: self.prior_major_in_a,
        }
    }

    pub fn world(&self) -> BoxWorld {
        BoxWorld {
            prizes: self.prizes,
            prior_major_in_a: self.prior_major_in_a,
            hidden_assignment: None,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if self.prizes.minor <= 0 || self.prizes.major <= 0 {
            report.error("prizes", "prize points must be positive integers");
        }
        if self.prizes.major <= self.prizes.minor {
            report.error("prizes", "the major prize must be worth more than the minor prize");
        }
        let mut ids = BTreeSet::new();
        for (list, cards) in [("cards_a", &self.cards_a), ("cards_b", &self.cards_b)] {
            for (i, card) in cards.iter().enumerate() {
                let field = format!("{list}[{i}]");
                if card.id.trim().is_empty() {
                    report.error(format!("{field}.id"), "card id must not be empty");
                }
                if !ids.insert(card.id.as_str()) {
                    report.error(format!("{field}.id"), format!("duplicate card `{}`", card.id));
                }
                if card.cost < 0 {
                    report.error(format!("{field}.cost"), "cost must not be negative");
                }
                if card.prob_major > 100 {
                    report.error(
                        format!("{field}.prob_major"),
                        format!("{}% is not a percentage between 0 and 100", card.prob_major),
                    );
                }
            }
        }
        if self.cards_a.is_empty() && self.cards_b.is_empty() {
            report.warning("", "no information cards: players can only guess");
        }
        report
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CardView {
    pub id: String,
    #[serde(rename = "box")]
    pub about_box: BoxId,
    pub cost: i64,
    pub prob_major: u32,
    pub difficulty: &'static str,
}

impl From<&InfoCard> for CardView {
    fn from(c: &InfoCard) -> Self {
        CardView {
            id: c.id.clone(),
            about_box: c.about_box,
            cost: c.cost,
            prob_major: c.prob_major,
            difficulty: difficulty(c.prob_major),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxValues {
    #[serde(rename = "A", serialize_with = "serialize_points")]
    pub a: Points,
    #[serde(rename = "B", serialize_with = "serialize_points")]
    pub b: Points,
}

/// Decision support for the player's current belief.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundAnalytics {
    pub major_in: BoxValues,
    pub expected_points: BoxValues,
    pub best_box: BoxId,
}

impl RoundAnalytics {
    fn new(prizes: &Prizes, belief: &Belief, sunk_cost: i64) -> Self {
        RoundAnalytics {
            major_in: BoxValues {
                a: belief.major_in(BoxId::A).value(),
                b: belief.major_in(BoxId::B).value(),
            },
            expected_points: BoxValues {
                a: prizes.expected_points(belief, BoxId::A, sunk_cost),
                b: prizes.expected_points(belief, BoxId::B, sunk_cost),
            },
            best_box: prizes.best_action(belief, sunk_cost).0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub player: String,
    pub card: Option<String>,
    pub card_cost: i64,
    pub chosen_box: BoxId,
    pub major_box: BoxId,
    pub points: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurpriseBoxPlay {
    world: BoxWorld,
    deck_a: Vec<InfoCard>,
    deck_b: Vec<InfoCard>,
    round: Option<PlayerRound>,
    ledger: Vec<RoundRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoxAction {
    BeginRound { player: String },
    /// Buy one random card from the given box's set.
    BuyCard { side: BoxId },
    SkipCard,
    OpenBox {
        #[serde(rename = "box")]
        chosen: BoxId,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoxOutcome {
    RoundBegun { player: String },
    CardBought { player: String, card: CardView, analytics: RoundAnalytics },
    CardSkipped { player: String, analytics: RoundAnalytics },
    BoxOpened {
        player: String,
        chosen_box: BoxId,
        major_box: BoxId,
        prize: i64,
        card_cost: i64,
        points_awarded: i64,
    },
}

impl SurpriseBoxPlay {
    pub fn world(&self) -> &BoxWorld {
        &self.world
    }

    pub fn round(&self) -> Option<&PlayerRound> {
        self.round.as_ref()
    }

    pub fn ledger(&self) -> &[RoundRecord] {
        &self.ledger
    }

    fn prior(&self) -> Belief {
        Belief {
            major_in_a: self.world.prior_major_in_a,
        }
    }

    fn current_round(&mut self, actor: &Actor, expected: RoundPhase) -> Result<&mut PlayerRound, SessionError> {
        let round = self
            .round
            .as_mut()
            .ok_or_else(|| SessionError::wrong_phase(expected, "no_round"))?;
        if round.phase != expected {
            return Err(SurpriseBoxError::WrongPhase {
                expected,
                actual: round.phase,
            }
            .into());
        }
        if !actor.is_teacher() && actor.label() != round.player {
            return Err(SessionError::IllegalAction(format!(
                "it is {}'s turn",
                round.player
            )));
        }
        Ok(round)
    }

    /// Places the prize for this round from the belief the player now holds,
    /// so the card they bought tells the truth in expectation.
    fn settle_information(&mut self, belief: &Belief, rng: &mut SessionRng) {
        self.world.hidden_assignment = Some(draw_assignment(belief, rng));
    }
}

impl Play for SurpriseBoxPlay {
    type Payload = BoxPayload;
    type Action = BoxAction;
    type Outcome = BoxOutcome;

    const ANALYTIC_KEYS: &'static [&'static str] = &["prob_major", "prior_major_in_A", "analytics"];

    fn init(payload: &BoxPayload) -> Self {
        SurpriseBoxPlay {
            world: payload.world(),
            deck_a: payload.cards(BoxId::A),
            deck_b: payload.cards(BoxId::B),
            round: None,
            ledger: Vec::new(),
        }
    }

    fn apply(&mut self, actor: &Actor, action: BoxAction, rng: &mut SessionRng) -> Result<BoxOutcome, SessionError> {
        match action {
            BoxAction::BeginRound { player } => {
                let player_actor: Actor = player.parse()?;
                if !matches!(player_actor, Actor::Student(_)) {
                    return Err(SessionError::IllegalAction("the teacher does not play a round".into()));
                }
                if !actor.is_teacher() && actor.label() != player {
                    return Err(SessionError::IllegalAction(format!("{actor} cannot start a round for {player}")));
                }
                if let Some(round) = &self.round {
                    if round.phase != RoundPhase::Revealed {
                        return Err(SessionError::wrong_phase(RoundPhase::Revealed, round.phase));
                    }
                }
                self.round = Some(PlayerRound::new(player.clone()));
                self.world.hidden_assignment = None;
                Ok(BoxOutcome::RoundBegun { player })
            }
            BoxAction::BuyCard { side } => {
                self.current_round(actor, RoundPhase::DecidingPurchase)?;
                let deck = match side {
                    BoxId::A => &mut self.deck_a,
                    BoxId::B => &mut self.deck_b,
                };
                let card = draw_card(deck, side, rng)?;
                let belief = posterior(&card);
                self.settle_information(&belief, rng);
                let prizes = self.world.prizes;
                let round = self.round.as_mut().expect("checked above");
                round.purchased_card = Some(card.clone());
                round.phase = RoundPhase::ChoosingBox;
                Ok(BoxOutcome::CardBought {
                    player: round.player.clone(),
                    card: CardView::from(&card),
                    analytics: RoundAnalytics::new(&prizes, &belief, card.cost),
                })
            }
            BoxAction::SkipCard => {
                self.current_round(actor, RoundPhase::DecidingPurchase)?;
                let prior = self.prior();
                self.settle_information(&prior, rng);
                let prizes = self.world.prizes;
                let round = self.round.as_mut().expect("checked above");
                round.phase = RoundPhase::ChoosingBox;
                Ok(BoxOutcome::CardSkipped {
                    player: round.player.clone(),
                    analytics: RoundAnalytics::new(&prizes, &prior, 0),
                })
            }
            BoxAction::OpenBox { chosen } => {
                let round = self.current_round(actor, RoundPhase::ChoosingBox)?.clone();
                let done = resolve_open(&self.world, round, chosen)?;
                let major_box = self.world.hidden_assignment.expect("drawn before choosing");
                let points = done.points_awarded.expect("set on reveal");
                self.ledger.push(RoundRecord {
                    player: done.player.clone(),
                    card: done.purchased_card.as_ref().map(|c| c.id.clone()),
                    card_cost: done.card_cost(),
                    chosen_box: chosen,
                    major_box,
                    points,
                });
                let outcome = BoxOutcome::BoxOpened {
                    player: done.player.clone(),
                    chosen_box: chosen,
                    major_box,
                    prize: self.world.prizes.prize(chosen, major_box),
                    card_cost: done.card_cost(),
                    points_awarded: points,
                };
                self.round = Some(done);
                Ok(outcome)
            }
        }
    }

    fn view(&self) -> Value {
        let round = self.round.as_ref().map(|r| {
            let mut v = json!({
                "player": r.player,
                "phase": r.phase,
                "purchased_card": r.purchased_card.as_ref().map(CardView::from),
                "chosen_box": r.chosen_box,
                "points_awarded": r.points_awarded,
            });
            if r.phase == RoundPhase::Revealed {
                v["major_box"] = json!(self.world.hidden_assignment);
            }
            v
        });
        let analytics = self.round.as_ref().and_then(|r| {
            if r.phase == RoundPhase::DecidingPurchase {
                return None;
            }
            let belief = r.purchased_card.as_ref().map_or(self.prior(), posterior);
            Some(RoundAnalytics::new(&self.world.prizes, &belief, r.card_cost()))
        });
        let mut all_cards = self.deck_a.clone();
        all_cards.extend(self.deck_b.iter().cloned());
        let table: Vec<Value> = card_table(&self.world.prizes, &self.prior(), &all_cards)
            .into_iter()
            .map(|row| {
                json!({
                    "card": row.card,
                    "posterior_best_box": row.posterior_best_box,
                    "ev": format_points(&row.ev),
                    "voi": format_points(&row.voi),
                })
            })
            .collect();
        json!({
            "prizes": self.world.prizes,
            "prior_major_in_A": self.world.prior_major_in_a,
            "cards_remaining": {"A": self.deck_a.len(), "B": self.deck_b.len()},
            "decks": {
                "A": self.deck_a.iter().map(CardView::from).collect::<Vec<_>>(),
                "B": self.deck_b.iter().map(CardView::from).collect::<Vec<_>>(),
            },
            "round": round,
            "ledger": self.ledger,
            "analytics": {
                "round": analytics,
                "card_table": table,
            },
        })
    }

    fn describe(outcome: &BoxOutcome, mode: DisplayMode) -> String {
        match outcome {
            BoxOutcome::RoundBegun { player } => format!("{player} steps up to the boxes"),
            BoxOutcome::CardBought { player, card, analytics } => {
                let hint = match mode {
                    DisplayMode::Teacher => format!(
                        "{}% chance the big prize is in box {} (best box {}, expected {})",
                        card.prob_major,
                        card.about_box,
                        analytics.best_box,
                        format_points(match analytics.best_box {
                            BoxId::A => &analytics.expected_points.a,
                            BoxId::B => &analytics.expected_points.b,
                        })
                    ),
                    DisplayMode::Student => format!(
                        "finding the big prize in box {} is {}",
                        card.about_box, card.difficulty
                    ),
                };
                format!("{player} buys card {} for {} points: {hint}", card.id, card.cost)
            }
            BoxOutcome::CardSkipped { player, .. } => format!("{player} buys no card"),
            BoxOutcome::BoxOpened {
                player,
                chosen_box,
                major_box,
                prize,
                card_cost,
                points_awarded,
            } => format!(
                "{player} opens box {chosen_box}: prize {prize}, card cost {card_cost}, {points_awarded} points (big prize was in box {major_box})"
            ),
        }
    }
}
