//! Independent reference implementations and generators shared by the
//! integration and acceptance tests. Nothing here calls the engine code it
//! is used to check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use classplay_core::little_trainers::DataCard;
use classplay_core::threshold_network::{Connection, Neuron, NeuronKind, Signals, ThresholdNetwork};
use classplay_core::{GameKind, LessonConfig, Session};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn lessons_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../lessons")
}

pub fn lesson_path(name: &str) -> PathBuf {
    lessons_dir().join(name)
}

pub fn load_lesson(name: &str) -> LessonConfig {
    let text = std::fs::read_to_string(lesson_path(name)).expect("lesson readable");
    LessonConfig::from_str_json(&text).expect("lesson valid").0
}

pub fn lesson_for(kind: GameKind) -> &'static str {
    match kind {
        GameKind::Cnn => "cnn.lesson.json",
        GameKind::SurpriseBox => "surprise_box.lesson.json",
        GameKind::LittleTrainers => "animals.lesson.json",
        GameKind::Predictors => "predictors.lesson.json",
        GameKind::ClassroomSpotify => "spotify.lesson.json",
    }
}

// ---------------------------------------------------------------------------
// Threshold networks
// ---------------------------------------------------------------------------

/// A random acyclic network with at most `max_neurons` neurons and rope
/// weights in 1..=3. Declaration orders are shuffled so the engine cannot
/// rely on them being topological.
pub fn random_dag(rng: &mut ChaCha8Rng, max_neurons: usize) -> ThresholdNetwork {
    let n = rng.random_range(2..=max_neurons);
    let inputs = rng.random_range(1..=(n - 1).min(3));
    let mut neurons: Vec<Neuron> = (0..n)
        .map(|i| Neuron {
            id: format!("n{i}"),
            threshold: if i < inputs { 0 } else { rng.random_range(0..=4) },
            kind: if i < inputs {
                NeuronKind::Input
            } else if i == n - 1 || rng.random_bool(0.3) {
                NeuronKind::Output
            } else {
                NeuronKind::Hidden
            },
        })
        .collect();
    let mut connections = Vec::new();
    for to in inputs..n {
        for from in 0..to {
            if rng.random_bool(0.5) {
                connections.push(Connection {
                    from: format!("n{from}"),
                    to: format!("n{to}"),
                    weight: rng.random_range(1..=3),
                });
            }
        }
    }
    neurons.shuffle(rng);
    connections.shuffle(rng);
    ThresholdNetwork { neurons, connections }
}

/// Every 0/1 assignment to the input neurons.
pub fn all_input_patterns(net: &ThresholdNetwork) -> Vec<Signals> {
    let ids: Vec<String> = net
        .neurons
        .iter()
        .filter(|n| n.kind == NeuronKind::Input)
        .map(|n| n.id.clone())
        .collect();
    (0..1u32 << ids.len())
        .map(|mask| {
            ids.iter()
                .enumerate()
                .map(|(i, id)| (id.clone(), ((mask >> i) & 1) as u8))
                .collect()
        })
        .collect()
}

/// Weighted sum arriving at `id`, defined recursively from the sources.
pub fn oracle_sum(net: &ThresholdNetwork, signals: &Signals, id: &str) -> u64 {
    net.connections
        .iter()
        .filter(|c| c.to == id)
        .map(|c| u64::from(c.weight) * u64::from(oracle_bit(net, signals, &c.from)))
        .sum()
}

pub fn oracle_bit(net: &ThresholdNetwork, signals: &Signals, id: &str) -> u8 {
    let neuron = net.neurons.iter().find(|n| n.id == id).expect("known neuron");
    match neuron.kind {
        NeuronKind::Input => signals[id],
        _ => u8::from(oracle_sum(net, signals, id) >= u64::from(neuron.threshold)),
    }
}

/// Output bits by brute recursion.
pub fn oracle_outputs(net: &ThresholdNetwork, signals: &Signals) -> BTreeMap<String, u8> {
    net.neurons
        .iter()
        .filter(|n| n.kind == NeuronKind::Output)
        .map(|n| (n.id.clone(), oracle_bit(net, signals, &n.id)))
        .collect()
}

/// Connections sorted by (from, to), each paired with its weight.
pub fn sorted_weights(net: &ThresholdNetwork) -> Vec<(String, String, u32)> {
    let mut v: Vec<_> = net
        .connections
        .iter()
        .map(|c| (c.from.clone(), c.to.clone(), c.weight))
        .collect();
    v.sort();
    v
}

/// Every distinct arrangement of `pool` over the connections (sorted by
/// endpoint names) that yields `desired`, smallest first. Built by trying
/// all n! index permutations and deduplicating.
pub fn oracle_reweigh(
    net: &ThresholdNetwork,
    signals: &Signals,
    desired: &BTreeMap<String, u8>,
    pool: &[u32],
) -> Vec<Vec<u32>> {
    let slots = sorted_weights(net);
    let mut found = BTreeSet::new();
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    permute(&mut indices, 0, &mut |perm| {
        let weights: Vec<u32> = perm.iter().map(|&i| pool[i]).collect();
        let mut candidate = net.clone();
        for c in candidate.connections.iter_mut() {
            let slot = slots.iter().position(|(f, t, _)| *f == c.from && *t == c.to).unwrap();
            c.weight = weights[slot];
        }
        let outputs = oracle_outputs(&candidate, signals);
        if desired.iter().all(|(id, bit)| outputs.get(id) == Some(bit)) {
            found.insert(weights);
        }
    });
    found.into_iter().collect()
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

// ---------------------------------------------------------------------------
// Nearest neighbour
// ---------------------------------------------------------------------------

pub fn oracle_distance(a: &BTreeMap<String, String>, b: &BTreeMap<String, String>) -> usize {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).count()
}

/// (label, distance, nearest id) from a full distance matrix. Ties on
/// distance: most examples at that distance, then the earliest example.
pub fn oracle_nearest(examples: &[(DataCard, String)], query: &DataCard) -> (String, usize, String) {
    let matrix: Vec<Vec<usize>> = std::iter::once(query)
        .chain(examples.iter().map(|(c, _)| c))
        .map(|a| {
            std::iter::once(query)
                .chain(examples.iter().map(|(c, _)| c))
                .map(|b| oracle_distance(&a.features, &b.features))
                .collect()
        })
        .collect();
    let row = &matrix[0][1..];
    let best = *row.iter().min().unwrap();
    let at_best: Vec<usize> = (0..examples.len()).filter(|&i| row[i] == best).collect();
    let votes = |label: &str| at_best.iter().filter(|&&i| examples[i].1 == label).count();
    let top = at_best.iter().map(|&i| votes(&examples[i].1)).max().unwrap();
    let winner = *at_best.iter().find(|&&i| votes(&examples[i].1) == top).unwrap();
    (examples[winner].1.clone(), best, examples[winner].0.id.clone())
}

pub fn random_card(rng: &mut ChaCha8Rng, id: String, features: &[&str], values: &[&str]) -> DataCard {
    DataCard {
        id,
        features: features
            .iter()
            .map(|f| (f.to_string(), values[rng.random_range(0..values.len())].to_string()))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Sequences
// ---------------------------------------------------------------------------

/// Smallest p in 1..=n with s[i] == s[i-p] for all i >= p, by direct scan.
pub fn oracle_period<T: PartialEq>(s: &[T]) -> usize {
    (1..=s.len())
        .find(|&p| (p..s.len()).all(|i| s[i] == s[i - p]))
        .unwrap_or(s.len())
}

/// First k where the scan-based period guess (with period < k) misses s[k].
pub fn oracle_surprise<T: PartialEq>(s: &[T]) -> Option<usize> {
    (1..s.len()).find(|&k| {
        let p = oracle_period(&s[..k]);
        p < k && s[k - p] != s[k]
    })
}

// ---------------------------------------------------------------------------
// Session fuzzing
// ---------------------------------------------------------------------------

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

/// A plausible (not necessarily legal) action for `kind`, with its actor.
pub fn random_action(kind: GameKind, rng: &mut ChaCha8Rng) -> (String, Value) {
    let student = format!("student-{}", rng.random_range(1..=4));
    let who = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { "teacher".to_string() } else { student.clone() };
    match kind {
        GameKind::Cnn => match rng.random_range(0..6) {
            0..=2 => (who(rng), json!({"type": "present", "signals": {"R": rng.random_range(0..=1)}})),
            3 => {
                let (from, to) = *pick(rng, &[("R", "B"), ("R", "C"), ("B", "D"), ("C", "D"), ("D", "E")]);
                ("teacher".into(), json!({"type": "set_weight", "from": from, "to": to, "weight": rng.random_range(1..=3)}))
            }
            _ => {
                let pool: Vec<u32> = (0..5).map(|_| rng.random_range(1..=3)).collect();
                ("teacher".into(), json!({"type": "reweigh", "desired": {"E": rng.random_range(0..=1)}, "pool": pool}))
            }
        },
        GameKind::SurpriseBox => {
            let player = format!("student-{}", rng.random_range(1..=3));
            let actor = if rng.random_bool(0.3) { "teacher".to_string() } else { player.clone() };
            let action = match rng.random_range(0..4) {
                0 => json!({"type": "begin_round", "player": player}),
                1 => json!({"type": "buy_card", "side": *pick(rng, &["A", "B"])}),
                2 => json!({"type": "skip_card"}),
                _ => json!({"type": "open_box", "box": *pick(rng, &["A", "B"])}),
            };
            (actor, action)
        }
        GameKind::LittleTrainers => {
            let features = ["ears", "snout", "sound", "size", "tail"];
            let values = ["pointed", "floppy", "long", "short", "bark", "howl", "large", "small"];
            let id = format!("card-{}", rng.random_range(0..1000));
            let card = random_card(rng, id, &features, &values);
            let label = *pick(rng, &["DOG", "CAT", "WOLF"]);
            match rng.random_range(0..7) {
                0 => (who(rng), json!({"type": "add_example", "card": card, "label": label})),
                1 => ("teacher".into(), json!({"type": "start_testing"})),
                2 => ("teacher".into(), json!({"type": "start_training"})),
                3 | 4 => (student.clone(), json!({"type": "query", "card": card})),
                5 => (student.clone(), json!({"type": "feedback", "correct": rng.random_bool(0.5), "label": label})),
                _ => ("teacher".into(), json!({"type": "evaluate"})),
            }
        }
        GameKind::Predictors => {
            if rng.random_bool(0.5) {
                (student.clone(), json!({"type": "guess", "symbol": *pick(rng, &["@", "☺", "$", "1", "2", "3"])}))
            } else {
                ("teacher".into(), json!({"type": "reveal"}))
            }
        }
        GameKind::ClassroomSpotify => match rng.random_range(0..3) {
            0 => {
                let rating: Vec<u8> = (0..4).map(|_| rng.random_range(1..=3)).collect();
                (who(rng), json!({"type": "rate", "song": *pick(rng, &["S1", "S2", "S3", "S4", "S5"]), "rating": rating}))
            }
            1 => (student.clone(), json!({"type": "request", "mood": *pick(rng, &["happy", "calm", "sad"])})),
            _ => {
                let accepted = rng.random_bool(0.5);
                let mut action = json!({"type": "respond", "accepted": accepted});
                if !accepted && rng.random_bool(0.8) {
                    action["reason"] = json!(*pick(rng, &["too slow", "too loud", "boring"]));
                }
                (student.clone(), action)
            }
        },
    }
}

/// Starts a session from `config` and feeds it random actions until
/// `events` of them (including the start) have been accepted. Rejected
/// actions leave no trace, so the log holds exactly `events` entries.
pub fn fuzz_session(config: LessonConfig, fuzz_seed: u64, events: usize) -> Session {
    let mut rng = ChaCha8Rng::seed_from_u64(fuzz_seed);
    let kind = config.game;
    let mut session = Session::create(config).expect("valid config");
    session.apply_event("teacher", json!({"type": "start"})).unwrap();
    let mut attempts = 0;
    while session.log().len() < events {
        attempts += 1;
        assert!(attempts < 100_000, "fuzzer stuck for {kind}");
        let (actor, action) = random_action(kind, &mut rng);
        let _ = session.apply_event(&actor, action);
    }
    session
}

/// Byte string compared when checking replay equality.
pub fn snapshot_bytes(session: &Session) -> String {
    serde_json::to_string(&session.snapshot()).unwrap()
}
