//! Feedforward binary-threshold networks.
//!
//! Every student is a neuron with an integer threshold printed on their
//! shirt; ropes carry positive integer weights. A neuron raises its hand
//! (bit 1) when the weighted sum of raised hands upstream reaches its
//! threshold. Input neurons fire iff their external signal is 1.

pub mod play;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::validation::ValidationReport;

pub type NeuronId = String;

/// External signal per input neuron, 0 or 1.
pub type Signals = BTreeMap<NeuronId, u8>;

/// Upper bound on distinct pool permutations `reweigh_search` will try.
pub const MAX_SEARCH_PERMUTATIONS: u128 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronKind {
    Input,
    Hidden,
    Output,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neuron {
    pub id: NeuronId,
    #[serde(default)]
    pub threshold: u32,
    pub kind: NeuronKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connection {
    pub from: NeuronId,
    pub to: NeuronId,
    pub weight: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdNetwork {
    pub neurons: Vec<Neuron>,
    pub connections: Vec<Connection>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("network must be acyclic (cycle: {})", .0.join(" -> "))]
    CycleDetected(Vec<NeuronId>),
    #[error("unknown neuron `{0}`")]
    UnknownNeuron(NeuronId),
    #[error("no signal supplied for input neuron `{0}`")]
    MissingInputSignal(NeuronId),
    #[error("`{0}` is not an input neuron and cannot receive an external signal")]
    UnexpectedSignal(NeuronId),
    #[error("signal for `{id}` must be 0 or 1, got {value}")]
    InvalidSignal { id: NeuronId, value: u8 },
    #[error("no connection {from} -> {to}")]
    UnknownConnection { from: NeuronId, to: NeuronId },
    #[error("rope weights must be positive integers")]
    InvalidWeight,
    #[error("weight pool has {got} ropes but the network has {expected} connections")]
    PoolSizeMismatch { expected: usize, got: usize },
    #[error("desired output names `{0}`, which is not an output neuron")]
    NotAnOutput(NeuronId),
    #[error("reassignment search would try {0} permutations, above the limit")]
    SearchTooLarge(u128),
}

impl NetworkError {
    pub fn code(&self) -> &'static str {
        match self {
            NetworkError::CycleDetected(_) => "cycle-detected",
            NetworkError::UnknownNeuron(_) => "unknown-neuron",
            NetworkError::MissingInputSignal(_) => "missing-input-signal",
            NetworkError::UnexpectedSignal(_) | NetworkError::InvalidSignal { .. } => {
                "invalid-signal"
            }
            NetworkError::UnknownConnection { .. } => "unknown-connection",
            NetworkError::InvalidWeight => "invalid-weight",
            NetworkError::PoolSizeMismatch { .. } => "pool-size-mismatch",
            NetworkError::NotAnOutput(_) => "not-an-output",
            NetworkError::SearchTooLarge(_) => "search-too-large",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronActivation {
    pub id: NeuronId,
    pub sum: u64,
    pub threshold: u32,
    pub bit: u8,
}

/// Per-neuron sums and bits, listed in topological order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationState {
    pub trace: Vec<NeuronActivation>,
}

impl ActivationState {
    pub fn get(&self, id: &str) -> Option<&NeuronActivation> {
        self.trace.iter().find(|n| n.id == id)
    }

    pub fn bit(&self, id: &str) -> Option<u8> {
        self.get(id).map(|n| n.bit)
    }

    /// One line per neuron: `id sum threshold bit`.
    pub fn render_trace(&self) -> String {
        let mut out = String::new();
        for n in &self.trace {
            out.push_str(&format!("{} {} {} {}\n", n.id, n.sum, n.threshold, n.bit));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub outputs: BTreeMap<NeuronId, u8>,
    /// True iff every output neuron fired.
    pub positive: bool,
}

impl Decision {
    pub fn label(&self) -> &'static str {
        if self.positive {
            "positive"
        } else {
            "negative"
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl ThresholdNetwork {
    pub fn neuron(&self, id: &str) -> Option<&Neuron> {
        self.neurons.iter().find(|n| n.id == id)
    }

    fn index_of(&self) -> HashMap<&str, usize> {
        self.neurons
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Neuron> {
        self.neurons.iter().filter(|n| n.kind == NeuronKind::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Neuron> {
        self.neurons.iter().filter(|n| n.kind == NeuronKind::Output)
    }

    /// Connection indices sorted by `(from, to)` labels.
    pub fn canonical_connection_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.connections.len()).collect();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&self.connections[a], &self.connections[b]);
            (&ca.from, &ca.to).cmp(&(&cb.from, &cb.to))
        });
        order
    }

    /// Neuron indices in topological order. Among ready neurons the one
    /// declared first goes first, so the order is stable.
    pub fn topological_order(&self) -> Result<Vec<usize>, NetworkError> {
        let index = self.index_of();
        let mut indegree = vec![0usize; self.neurons.len()];
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); self.neurons.len()];
        for c in &self.connections {
            let from = *index
                .get(c.from.as_str())
                .ok_or_else(|| NetworkError::UnknownNeuron(c.from.clone()))?;
            let to = *index
                .get(c.to.as_str())
                .ok_or_else(|| NetworkError::UnknownNeuron(c.to.clone()))?;
            outgoing[from].push(to);
            indegree[to] += 1;
        }
        let mut ready: BTreeSet<usize> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| i)
            .collect();
        let mut order = Vec::with_capacity(self.neurons.len());
        while let Some(next) = ready.pop_first() {
            order.push(next);
            for &to in &outgoing[next] {
                indegree[to] -= 1;
                if indegree[to] == 0 {
                    ready.insert(to);
                }
            }
        }
        if order.len() < self.neurons.len() {
            return Err(NetworkError::CycleDetected(
                self.find_cycle().unwrap_or_default(),
            ));
        }
        Ok(order)
    }

    /// Returns one directed cycle as a closed path of labels, if any.
    pub fn find_cycle(&self) -> Option<Vec<NeuronId>> {
        let index = self.index_of();
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); self.neurons.len()];
        for c in &self.connections {
            if let (Some(&f), Some(&t)) = (index.get(c.from.as_str()), index.get(c.to.as_str())) {
                outgoing[f].push(t);
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut color = vec![0u8; self.neurons.len()];
        let mut stack: Vec<usize> = Vec::new();
        fn visit(
            v: usize,
            outgoing: &[Vec<usize>],
            color: &mut [u8],
            stack: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            color[v] = 1;
            stack.push(v);
            for &w in &outgoing[v] {
                if color[w] == 1 {
                    let start = stack.iter().position(|&s| s == w).unwrap_or(0);
                    let mut cycle = stack[start..].to_vec();
                    cycle.push(w);
                    return Some(cycle);
                }
                if color[w] == 0 {
                    if let Some(c) = visit(w, outgoing, color, stack) {
                        return Some(c);
                    }
                }
            }
            stack.pop();
            color[v] = 2;
            None
        }
        for v in 0..self.neurons.len() {
            if color[v] == 0 {
                if let Some(cycle) = visit(v, &outgoing, &mut color, &mut stack) {
                    return Some(
                        cycle
                            .into_iter()
                            .map(|i| self.neurons[i].id.clone())
                            .collect(),
                    );
                }
            }
        }
        None
    }

    fn check_signals(&self, signals: &Signals) -> Result<(), NetworkError> {
        for (id, &value) in signals {
            match self.neuron(id) {
                None => return Err(NetworkError::UnknownNeuron(id.clone())),
                Some(n) if n.kind != NeuronKind::Input => {
                    return Err(NetworkError::UnexpectedSignal(id.clone()))
                }
                Some(_) if value > 1 => {
                    return Err(NetworkError::InvalidSignal {
                        id: id.clone(),
                        value,
                    })
                }
                Some(_) => {}
            }
        }
        for input in self.inputs() {
            if !signals.contains_key(&input.id) {
                return Err(NetworkError::MissingInputSignal(input.id.clone()));
            }
        }
        Ok(())
    }

    /// Single topological pass: each neuron sums `source bit × weight` over
    /// its incoming ropes and fires when the sum reaches its threshold.
    pub fn propagate(&self, signals: &Signals) -> Result<ActivationState, NetworkError> {
        self.check_signals(signals)?;
        let order = self.topological_order()?;
        let index = self.index_of();
        let mut incoming: Vec<Vec<(usize, u32)>> = vec![Vec::new(); self.neurons.len()];
        for c in &self.connections {
            incoming[index[c.to.as_str()]].push((index[c.from.as_str()], c.weight));
        }
        let mut bits = vec![0u8; self.neurons.len()];
        let mut trace = Vec::with_capacity(order.len());
        for i in order {
            let neuron = &self.neurons[i];
            let sum: u64 = incoming[i]
                .iter()
                .map(|&(src, w)| u64::from(bits[src]) * u64::from(w))
                .sum();
            let bit = match neuron.kind {
                NeuronKind::Input => signals[&neuron.id],
                _ => u8::from(sum >= u64::from(neuron.threshold)),
            };
            bits[i] = bit;
            trace.push(NeuronActivation {
                id: neuron.id.clone(),
                sum,
                threshold: neuron.threshold,
                bit,
            });
        }
        Ok(ActivationState { trace })
    }

    pub fn decide(&self, signals: &Signals) -> Result<Decision, NetworkError> {
        let state = self.propagate(signals)?;
        Ok(self.decision_from(&state))
    }

    pub fn decision_from(&self, state: &ActivationState) -> Decision {
        let outputs: BTreeMap<NeuronId, u8> = self
            .outputs()
            .map(|n| (n.id.clone(), state.bit(&n.id).unwrap_or(0)))
            .collect();
        let positive = outputs.values().all(|&b| b == 1);
        Decision { outputs, positive }
    }

    pub fn set_weight(&mut self, from: &str, to: &str, weight: u32) -> Result<(), NetworkError> {
        if weight == 0 {
            return Err(NetworkError::InvalidWeight);
        }
        let conn = self
            .connections
            .iter_mut()
            .find(|c| c.from == from && c.to == to)
            .ok_or_else(|| NetworkError::UnknownConnection {
                from: from.to_string(),
                to: to.to_string(),
            })?;
        conn.weight = weight;
        Ok(())
    }

    /// Current weights listed in canonical connection order.
    pub fn canonical_assignment(&self) -> Vec<Connection> {
        self.canonical_connection_order()
            .into_iter()
            .map(|i| self.connections[i].clone())
            .collect()
    }

    /// Copy of the network with weights taken from `assignment`, matched by
    /// `(from, to)`.
    pub fn with_assignment(&self, assignment: &[Connection]) -> Result<Self, NetworkError> {
        let mut next = self.clone();
        for c in assignment {
            next.set_weight(&c.from, &c.to, c.weight)?;
        }
        Ok(next)
    }

    /// Exhaustive "change the ropes" search: tries every distinct way of
    /// hanging the pool's ropes on the connections and returns the first
    /// (lexicographically smallest in canonical connection order) under
    /// which the outputs equal `desired`.
    pub fn reweigh_search(
        &self,
        signals: &Signals,
        desired: &BTreeMap<NeuronId, u8>,
        pool: &[u32],
    ) -> Result<Option<Vec<Connection>>, NetworkError> {
        if pool.len() != self.connections.len() {
            return Err(NetworkError::PoolSizeMismatch {
                expected: self.connections.len(),
                got: pool.len(),
            });
        }
        if pool.contains(&0) {
            return Err(NetworkError::InvalidWeight);
        }
        for id in desired.keys() {
            if self.neuron(id).map(|n| n.kind) != Some(NeuronKind::Output) {
                return Err(NetworkError::NotAnOutput(id.clone()));
            }
        }
        let meets = |net: &ThresholdNetwork| -> Result<bool, NetworkError> {
            let decision = net.decide(signals)?;
            Ok(desired
                .iter()
                .all(|(id, bit)| decision.outputs.get(id) == Some(bit)))
        };
        if meets(self)? {
            return Ok(Some(self.canonical_assignment()));
        }

        let mut weights = pool.to_vec();
        weights.sort_unstable();
        let count = distinct_permutations(&weights);
        if count > MAX_SEARCH_PERMUTATIONS {
            return Err(NetworkError::SearchTooLarge(count));
        }
        let order = self.canonical_connection_order();
        let mut candidate = self.clone();
        loop {
            for (slot, &conn) in order.iter().enumerate() {
                candidate.connections[conn].weight = weights[slot];
            }
            if meets(&candidate)? {
                return Ok(Some(candidate.canonical_assignment()));
            }
            if !next_permutation(&mut weights) {
                return Ok(None);
            }
        }
    }
}

/// Rearranges into the next lexicographic permutation; false after the last.
pub(crate) fn next_permutation<T: Ord>(items: &mut [T]) -> bool {
    if items.len() < 2 {
        return false;
    }
    let mut i = items.len() - 1;
    while i > 0 && items[i - 1] >= items[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = items.len() - 1;
    while items[j] <= items[i - 1] {
        j -= 1;
    }
    items.swap(i - 1, j);
    items[i..].reverse();
    true
}

fn distinct_permutations(sorted: &[u32]) -> u128 {
    let mut total: u128 = 1;
    let mut run = 0u128;
    for (i, w) in sorted.iter().enumerate() {
        run = if i > 0 && sorted[i - 1] == *w { run + 1 } else { 1 };
        // n! / prod(k!) built incrementally: multiply by position, divide by run length
        total = total.saturating_mul(i as u128 + 1) / run;
    }
    total
}

/// Static structure checks. Errors make a network unplayable; warnings flag
/// suspicious but legal wiring.
pub fn validate_network(network: &ThresholdNetwork) -> ValidationReport {
    let mut report = ValidationReport::new();
    let mut seen = BTreeSet::new();
    for (i, n) in network.neurons.iter().enumerate() {
        if n.id.trim().is_empty() {
            report.error(format!("neurons[{i}].id"), "neuron id must not be empty");
        }
        if !seen.insert(n.id.as_str()) {
            report.error(format!("neurons[{i}].id"), format!("duplicate neuron `{}`", n.id));
        }
    }
    if network.inputs().next().is_none() {
        report.error("neurons", "network needs at least one input neuron");
    }
    if network.outputs().next().is_none() {
        report.error("neurons", "network needs at least one output neuron");
    }

    let mut pairs = BTreeSet::new();
    let mut wiring_ok = true;
    for (i, c) in network.connections.iter().enumerate() {
        let field = format!("connections[{i}]");
        for end in [&c.from, &c.to] {
            if network.neuron(end).is_none() {
                report.error(&field, format!("unknown neuron `{end}`"));
                wiring_ok = false;
            }
        }
        if c.weight == 0 {
            report.error(format!("{field}.weight"), "weight must be a positive integer");
        }
        if !pairs.insert((c.from.as_str(), c.to.as_str())) {
            report.error(&field, format!("duplicate connection {} -> {}", c.from, c.to));
        }
        if network.neuron(&c.to).map(|n| n.kind) == Some(NeuronKind::Input) {
            report.error(&field, format!("input neuron `{}` cannot receive a rope", c.to));
        }
    }
    if !wiring_ok {
        return report;
    }
    if let Some(cycle) = network.find_cycle() {
        report.error(
            "connections",
            format!("network must be acyclic (cycle: {})", cycle.join(" -> ")),
        );
        return report;
    }

    // reachability from inputs
    let mut reached: BTreeSet<&str> = network.inputs().map(|n| n.id.as_str()).collect();
    loop {
        let before = reached.len();
        for c in &network.connections {
            if reached.contains(c.from.as_str()) {
                reached.insert(c.to.as_str());
            }
        }
        if reached.len() == before {
            break;
        }
    }
    for out in network.outputs() {
        if !reached.contains(out.id.as_str()) {
            report.warning(
                "neurons",
                format!("output neuron `{}` is unreachable from any input", out.id),
            );
        }
    }
    report
}

/// The five-student network from the red-card demonstration.
pub fn demo_network() -> ThresholdNetwork {
    let neuron = |id: &str, threshold, kind| Neuron {
        id: id.into(),
        threshold,
        kind,
    };
    let rope = |from: &str, to: &str, weight| Connection {
        from: from.into(),
        to: to.into(),
        weight,
    };
    ThresholdNetwork {
        neurons: vec![
            neuron("R", 0, NeuronKind::Input),
            neuron("B", 2, NeuronKind::Hidden),
            neuron("C", 2, NeuronKind::Hidden),
            neuron("D", 2, NeuronKind::Hidden),
            neuron("E", 3, NeuronKind::Output),
        ],
        connections: vec![
            rope("R", "B", 1),
            rope("R", "C", 2),
            rope("B", "D", 1),
            rope("C", "D", 1),
            rope("D", "E", 3),
        ],
    }
}
