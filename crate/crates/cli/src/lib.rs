//! The `classplay` subcommands. Each writes its report to the given writer
//! and returns a [`CliError`] whose exit code separates lesson problems (1)
//! from environment problems (2).

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use classplay_core::surprise_box::{card_table, format_points, simulate_rounds, Belief};
use classplay_core::{validate_config, GameKind, GamePayload, LessonConfig, Session};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The lesson, script or request is wrong.
    #[error("{0}")]
    Domain(String),
    /// Files, sockets and the like.
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Environment(_) => 2,
        }
    }
}

pub type CliResult = Result<(), CliError>;

fn env_err(context: impl std::fmt::Display) -> impl FnOnce(std::io::Error) -> CliError {
    move |e| CliError::Environment(format!("{context}: {e}"))
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult {
    out.write_all(text.as_bytes()).map_err(env_err("stdout"))
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(env_err(path.display()))?;
    serde_json::from_str(&text).map_err(|e| CliError::Domain(format!("{}: not valid JSON: {e}", path.display())))
}

/// Reads and validates a lesson, applying a seed override.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<LessonConfig, CliError> {
    let value = read_json(path)?;
    let (mut config, _) = LessonConfig::from_json(&value)
        .map_err(|report| CliError::Domain(format!("{}: invalid lesson\n{}", path.display(), report.to_string().trim_end())))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

pub fn validate(path: &Path, quiet: bool, out: &mut dyn Write) -> CliResult {
    let value = read_json(path)?;
    let report = validate_config(&value);
    if report.has_errors() {
        return Err(CliError::Domain(format!(
            "{}: {} error(s)\n{}",
            path.display(),
            report.errors().count(),
            report.to_string().trim_end()
        )));
    }
    if !quiet {
        let game = value.get("game").and_then(Value::as_str).unwrap_or("?");
        let mut text = format!("ok: {} ({game}, {} warning(s))\n", path.display(), report.warnings().count());
        text.push_str(&report.to_string());
        emit(out, &text)?;
    }
    Ok(())
}

/// One script line: who does what. Exported session logs qualify too;
/// their extra fields are ignored.
fn parse_script(path: &Path) -> Result<Vec<(usize, String, Value)>, CliError> {
    let text = fs::read_to_string(path).map_err(env_err(path.display()))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |why: &str| CliError::Domain(format!("{} line {}: {why}", path.display(), i + 1));
        let record: Value = serde_json::from_str(line).map_err(|e| bad(&e.to_string()))?;
        let actor = record.get("actor").and_then(Value::as_str).ok_or_else(|| bad("missing string field `actor`"))?;
        let action = record.get("action").filter(|a| a.is_object()).ok_or_else(|| bad("missing object field `action`"))?;
        records.push((i + 1, actor.to_string(), action.clone()));
    }
    Ok(records)
}

pub fn run(config: &Path, script: &Path, seed: Option<u64>, log_out: Option<&Path>, quiet: bool, out: &mut dyn Write) -> CliResult {
    let config = load_config(config, seed)?;
    let records = parse_script(script)?;
    let mode = config.display_mode;
    let mut session = Session::create(config).map_err(|e| CliError::Domain(e.to_string()))?;
    let mut failure = None;
    for (line, actor, action) in records {
        let seq = session.next_seq();
        let kind = action.get("type").and_then(Value::as_str).unwrap_or("?").to_string();
        match session.apply_event(&actor, action) {
            Ok(outcome) => {
                if !quiet {
                    emit(out, &format!("[{seq}] {actor} {kind}\n{}\n", outcome.describe(mode)))?;
                }
            }
            Err(e) => {
                failure = Some(CliError::Domain(format!(
                    "seq {seq} ({} line {line}): {}: {e}",
                    script.display(),
                    e.code()
                )));
                break;
            }
        }
    }
    if let Some(path) = log_out {
        fs::write(path, session.export_jsonl()).map_err(env_err(path.display()))?;
    }
    if let Some(err) = failure {
        return Err(err);
    }
    let state = serde_json::to_string_pretty(&session.view(mode)).expect("views serialize");
    emit(out, &format!("final state:\n{state}\n"))
}

pub fn simulate(config: &Path, rounds: u64, seed: Option<u64>, out: &mut dyn Write) -> CliResult {
    let config = load_config(config, seed)?;
    let GamePayload::SurpriseBox(payload) = &config.payload else {
        return Err(CliError::Domain(format!(
            "wrong-game-kind: simulate needs a surprise_box lesson, got {}",
            config.game
        )));
    };
    let world = payload.world();
    let prior = payload.prior();
    let cards = payload.all_cards();
    let mut text = String::from("card\tposterior_best_box\tev\tvoi\tempirical_mean\tstd_err\n");
    if rounds > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (best, baseline) = world.prizes.best_action(&prior, 0);
        let summary = simulate_rounds(&world, None, rounds, &mut rng);
        let _ = writeln!(
            text,
            "-\t{best}\t{}\t0\t{:.4}\t{:.4}",
            format_points(&baseline),
            summary.mean,
            summary.std_err
        );
        for (card, row) in cards.iter().zip(card_table(&world.prizes, &prior, &cards)) {
            let summary = simulate_rounds(&world, Some(card), rounds, &mut rng);
            let _ = writeln!(
                text,
                "{}\t{}\t{}\t{}\t{:.4}\t{:.4}",
                card.notation(),
                row.posterior_best_box,
                format_points(&row.ev),
                format_points(&row.voi),
                summary.mean,
                summary.std_err
            );
        }
    }
    emit(out, &text)
}

pub fn materials(config: &Path, out: &mut dyn Write) -> CliResult {
    let config = load_config(config, None)?;
    emit(out, &materials_text(&config))
}

/// Printable kit list for a lesson.
pub fn materials_text(config: &LessonConfig) -> String {
    let mut t = format!("Materials for a {} lesson\n\n", config.game);
    match &config.payload {
        GamePayload::Cnn(p) => {
            let _ = writeln!(t, "T-shirts ({}):", p.neurons.len());
            for n in &p.neurons {
                let kind = serde_json::to_value(n.kind).expect("kinds serialize");
                let _ = writeln!(t, "  {:<6} number {:<3} {}", n.id, n.threshold, kind.as_str().unwrap_or("?"));
            }
            let _ = writeln!(t, "\nRopes ({}):", p.connections.len());
            for c in &p.connections {
                let _ = writeln!(t, "  {} -> {}  weight {}", c.from, c.to, c.weight);
            }
            if let Some(signals) = &p.input_assignment {
                let cards: Vec<String> = signals.iter().map(|(id, bit)| format!("{id}={bit}")).collect();
                let _ = writeln!(t, "\nSignal card: {}", cards.join(", "));
            }
        }
        GamePayload::SurpriseBox(p) => {
            let prior = p.prior().major_in(classplay_core::surprise_box::BoxId::A).value();
            let _ = writeln!(t, "Boxes: A and B; major prize {} points, minor prize {} points", p.prizes.major, p.prizes.minor);
            let _ = writeln!(t, "Chance the major prize is in A: {}", format_points(&(prior * 100)) + "%");
            for (label, cards) in [("A", &p.cards_a), ("B", &p.cards_b)] {
                let _ = writeln!(t, "\nInformation cards about box {label} ({}):", cards.len());
                for c in cards {
                    let _ = writeln!(
                        t,
                        "  {}_{}^{}  costs {} points, says {}% ({})",
                        c.id,
                        c.cost,
                        c.prob_major,
                        c.cost,
                        c.prob_major,
                        classplay_core::surprise_box::difficulty(c.prob_major)
                    );
                }
            }
            let table = card_table(&p.prizes, &Belief { major_in_a: p.prior_major_in_a }, &p.all_cards());
            let _ = writeln!(t, "\nTeacher sheet (card, best box after reading, expected points, value):");
            for row in table {
                let _ = writeln!(t, "  {}  {}  {}  {}", row.card, row.posterior_best_box, format_points(&row.ev), format_points(&row.voi));
            }
        }
        GamePayload::LittleTrainers(p) => {
            let _ = writeln!(t, "Feature columns: {}", p.features.join(", "));
            for (title, cards) in [("Training cards", &p.examples), ("Test cards", &p.tests)] {
                let _ = writeln!(t, "\n{title} ({}):", cards.len());
                for c in cards {
                    let values: Vec<&str> = p.features.iter().map(|f| c.features.get(f).map_or("-", String::as_str)).collect();
                    let _ = writeln!(t, "  {:<12} {:<40} {}", c.id, values.join(" / "), c.label);
                }
            }
        }
        GamePayload::Predictors(p) => {
            let n = p.material_length();
            let sequence = p.spec().expand(n).map(|s| s.symbols().to_vec()).unwrap_or_default();
            let _ = writeln!(t, "Sequence cards ({n}):");
            for (i, s) in sequence.iter().enumerate() {
                let _ = writeln!(t, "  {:>2}. {s}", i + 1);
            }
        }
        GamePayload::ClassroomSpotify(p) => {
            let _ = writeln!(t, "Song cards ({}):", p.songs.len());
            for s in &p.songs {
                let rating = match s.rating {
                    Some(r) => {
                        let [a, b, c, d] = r.components();
                        format!("RLID ({a},{b},{c},{d})  score {}", classplay_core::classroom_spotify::neuron_score(&r))
                    }
                    None => "RLID (_,_,_,_)  to be rated".to_string(),
                };
                let _ = writeln!(t, "  {:<4} {:<24} {rating}", s.id, s.title);
            }
            let _ = writeln!(t, "\nMood cards ({}):", p.moods.len());
            for m in &p.moods {
                let [a, b, c, d] = m.target.components();
                let _ = writeln!(t, "  {:<10} target ({a},{b},{c},{d})", m.name);
            }
            let _ = writeln!(t, "\nRating cards: R, L, I, D with values 1, 2, 3");
            let _ = writeln!(t, "Boards: one score board, one feedback board with a column per mood");
        }
    }
    t
}

pub struct ServeOptions {
    pub port: u16,
    pub config_dir: Option<PathBuf>,
    pub log_dir: Option<PathBuf>,
    pub resume: Option<PathBuf>,
}

/// Runs the HTTP service until Ctrl-C.
pub fn serve(options: ServeOptions, quiet: bool, out: &mut dyn Write) -> CliResult {
    let runtime = tokio::runtime::Runtime::new().map_err(env_err("runtime"))?;
    runtime.block_on(async move {
        let state = match options.resume {
            Some(dir) => {
                let (state, failures) = classplay_server::AppState::resume(options.config_dir, dir)
                    .map_err(|e| CliError::Environment(e.to_string()))?;
                for f in failures {
                    emit(out, &format!("warning: session {} not restored: {}\n", f.id, f.reason))?;
                }
                if !quiet {
                    emit(out, &format!("restored {} session(s)\n", state.session_count()))?;
                }
                state
            }
            None => classplay_server::AppState::new(options.config_dir, options.log_dir)
                .map_err(|e| CliError::Environment(e.to_string()))?,
        };
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", options.port))
            .await
            .map_err(env_err(format!("cannot bind port {}", options.port)))?;
        let addr = listener.local_addr().map_err(env_err("listener"))?;
        // printed even when quiet: with port 0 it is the only way to find the server
        emit(out, &format!("listening on http://{addr}\n"))?;
        out.flush().map_err(env_err("stdout"))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        classplay_server::serve(listener, state, shutdown)
            .await
            .map_err(env_err("server"))
    })
}

/// Parses a game name such as `predictors`.
pub fn game_kind(name: &str) -> Result<GameKind, CliError> {
    name.parse().map_err(CliError::Domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lesson(name: &str) -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../lessons").join(name)
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Domain("x".into()).exit_code(), 1);
        assert_eq!(CliError::Environment("x".into()).exit_code(), 2);
    }

    #[test]
    fn validate_reports() {
        let mut out = Vec::new();
        validate(&lesson("cnn.lesson.json"), false, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("ok: "));
        let err = validate(&lesson("missing.json"), false, &mut Vec::new()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn cnn_materials_list_shirts_and_ropes() {
        let config = load_config(&lesson("cnn.lesson.json"), None).unwrap();
        let text = materials_text(&config);
        assert!(text.contains("T-shirts (5):"));
        assert!(text.contains("Ropes (5):"));
        assert!(text.contains("  D -> E  weight 3"));
    }

    #[test]
    fn predictor_materials_number_eighteen_cards() {
        let config = load_config(&lesson("predictors.lesson.json"), None).unwrap();
        let text = materials_text(&config);
        assert!(text.contains("Sequence cards (18):"));
        assert!(text.contains("  18. 3"));
        assert!(!text.contains("  19."));
    }

    #[test]
    fn simulate_with_zero_rounds_is_header_only() {
        let mut out = Vec::new();
        simulate(&lesson("surprise_box.lesson.json"), 0, None, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1);
        let err = simulate(&lesson("cnn.lesson.json"), 10, None, &mut Vec::new()).unwrap_err();
        assert!(err.to_string().starts_with("wrong-game-kind"));
    }

    #[test]
    fn game_kinds_parse() {
        assert_eq!(game_kind("predictors").unwrap(), GameKind::Predictors);
        assert_eq!(game_kind("chess").unwrap_err().exit_code(), 1);
    }
}
