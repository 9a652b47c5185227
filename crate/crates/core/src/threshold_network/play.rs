use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{validate_network, Connection, Decision, Neuron, NeuronActivation, NetworkError, NeuronId, Signals, ThresholdNetwork};
use crate::session::{Actor, DisplayMode, Play, SessionError};
use crate::validation::ValidationReport;
use crate::SessionRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnPayload {
    pub neurons: Vec<Neuron>,
    pub connections: Vec<Connection>,
    /// Signals used when a presentation does not name its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_assignment: Option<Signals>,
}

impl CnnPayload {
    pub const FIELDS: &'static [&'static str] = &["neurons", "connections", "input_assignment"];

    pub fn network(&self) -> ThresholdNetwork {
        ThresholdNetwork {
            neurons: self.neurons.clone(),
            connections: self.connections.clone(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let network = self.network();
        let mut report = validate_network(&network);
        if let Some(signals) = &self.input_assignment {
            for (id, &bit) in signals {
                match network.neuron(id) {
                    Some(n) if n.kind == super::NeuronKind::Input => {
                        if bit > 1 {
                            report.error(format!("input_assignment.{id}"), "signal must be 0 or 1");
                        }
                    }
                    _ => report.error(format!("input_assignment.{id}"), "not an input neuron"),
                }
            }
            for input in network.inputs() {
                if !signals.contains_key(&input.id) {
                    report.error("input_assignment", format!("no default signal for input `{}`", input.id));
                }
            }
        }
        report
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Presentation {
    pub signals: Signals,
    pub trace: Vec<NeuronActivation>,
    pub outputs: BTreeMap<NeuronId, u8>,
    pub decision: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CnnPlay {
    network: ThresholdNetwork,
    default_signals: Option<Signals>,
    last: Option<Presentation>,
    presentations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CnnAction {
    /// The user shows a signal card; input neurons raise hands accordingly.
    Present {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        signals: Option<Signals>,
    },
    /// Teacher swaps one rope.
    SetWeight { from: NeuronId, to: NeuronId, weight: u32 },
    /// Teacher searches for a rope arrangement giving the desired output
    /// and, if one exists, rewires the network with it.
    Reweigh {
        desired: BTreeMap<NeuronId, u8>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pool: Option<Vec<u32>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        signals: Option<Signals>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CnnOutcome {
    Presented(Presentation),
    WeightChanged { from: NeuronId, to: NeuronId, weight: u32 },
    Reweighed {
        found: bool,
        assignment: Option<Vec<Connection>>,
        presentation: Presentation,
    },
}

impl CnnPlay {
    fn present(&self, signals: Signals) -> Result<Presentation, NetworkError> {
        let state = self.network.propagate(&signals)?;
        let Decision { outputs, positive } = self.network.decision_from(&state);
        Ok(Presentation {
            signals,
            trace: state.trace,
            outputs,
            decision: if positive { "positive" } else { "negative" }.to_string(),
        })
    }

    fn signals_or_default(&self, explicit: Option<Signals>) -> Result<Signals, SessionError> {
        explicit
            .or_else(|| self.last.as_ref().map(|p| p.signals.clone()))
            .or_else(|| self.default_signals.clone())
            .ok_or_else(|| {
                let missing = self.network.inputs().next().map(|n| n.id.clone()).unwrap_or_default();
                NetworkError::MissingInputSignal(missing).into()
            })
    }

    pub fn network(&self) -> &ThresholdNetwork {
        &self.network
    }
}

impl Play for CnnPlay {
    type Payload = CnnPayload;
    type Action = CnnAction;
    type Outcome = CnnOutcome;

    const ANALYTIC_KEYS: &'static [&'static str] = &[];

    fn init(payload: &CnnPayload) -> Self {
        CnnPlay {
            network: payload.network(),
            default_signals: payload.input_assignment.clone(),
            last: None,
            presentations: 0,
        }
    }

    fn apply(&mut self, actor: &Actor, action: CnnAction, _rng: &mut SessionRng) -> Result<CnnOutcome, SessionError> {
        match action {
            CnnAction::Present { signals } => {
                let signals = match signals {
                    Some(s) => s,
                    None => self.default_signals.clone().ok_or_else(|| {
                        let missing = self.network.inputs().next().map(|n| n.id.clone()).unwrap_or_default();
                        SessionError::from(NetworkError::MissingInputSignal(missing))
                    })?,
                };
                let presentation = self.present(signals)?;
                self.last = Some(presentation.clone());
                self.presentations += 1;
                Ok(CnnOutcome::Presented(presentation))
            }
            CnnAction::SetWeight { from, to, weight } => {
                actor.require_teacher("change the ropes")?;
                self.network.set_weight(&from, &to, weight)?;
                Ok(CnnOutcome::WeightChanged { from, to, weight })
            }
            CnnAction::Reweigh { desired, pool, signals } => {
                actor.require_teacher("change the ropes")?;
                let signals = self.signals_or_default(signals)?;
                let pool = pool.unwrap_or_else(|| self.network.connections.iter().map(|c| c.weight).collect());
                let assignment = self.network.reweigh_search(&signals, &desired, &pool)?;
                let mut next = self.clone();
                if let Some(found) = &assignment {
                    next.network = self.network.with_assignment(found)?;
                }
                let presentation = next.present(signals)?;
                next.last = Some(presentation.clone());
                *self = next;
                Ok(CnnOutcome::Reweighed {
                    found: assignment.is_some(),
                    assignment,
                    presentation,
                })
            }
        }
    }

    fn view(&self) -> Value {
        json!({
            "network": self.network,
            "last": self.last,
            "presentations": self.presentations,
        })
    }

    fn describe(outcome: &CnnOutcome, _mode: DisplayMode) -> String {
        let trace = |p: &Presentation| {
            let mut out = String::new();
            for n in &p.trace {
                out.push_str(&format!("{} {} {} {}\n", n.id, n.sum, n.threshold, n.bit));
            }
            out.push_str(&format!("decision: {}", p.decision));
            out
        };
        match outcome {
            CnnOutcome::Presented(p) => trace(p),
            CnnOutcome::WeightChanged { from, to, weight } => format!("rope {from} -> {to} now weighs {weight}"),
            CnnOutcome::Reweighed { found: false, .. } => "no rope arrangement gives the desired output".to_string(),
            CnnOutcome::Reweighed { assignment, presentation, .. } => {
                let ropes: Vec<String> = assignment
                    .iter()
                    .flatten()
                    .map(|c| format!("{}->{}:{}", c.from, c.to, c.weight))
                    .collect();
                format!("ropes rearranged: {}\n{}", ropes.join(" "), trace(presentation))
            }
        }
    }
}
