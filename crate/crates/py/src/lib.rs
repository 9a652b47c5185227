//! Python bindings. JSON-shaped arguments accept either Python objects or
//! JSON text; results come back as plain Python objects. Every failure
//! raises `ClassplayError(code, message)`.

use classplay_core::classroom_spotify::{neuron_score as score, RlidRating};
use classplay_core::predictors::{self, PatternSpec, PlanStep, SequencePrefix, Symbol};
use classplay_core::surprise_box::card_table as table;
use classplay_core::surprise_box::play::BoxPayload;
use classplay_core::threshold_network::{validate_network, Signals, ThresholdNetwork};
use classplay_core::{parse_jsonl, DisplayMode, LessonConfig};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyModule, PyString};
use serde_json::{json, Value};

create_exception!(classplay, ClassplayError, PyValueError);

/// An error code and a human-readable message.
type Failure = (String, String);

fn failure(code: &str, message: impl ToString) -> Failure {
    (code.to_string(), message.to_string())
}

fn raise(f: Failure) -> PyErr {
    ClassplayError::new_err(f)
}

fn to_value(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = if let Ok(s) = obj.cast::<PyString>() {
        s.to_str()?.to_string()
    } else {
        let json = PyModule::import(obj.py(), "json")?;
        json.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(|e| raise(failure("malformed-json", e)))
}

fn to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    PyModule::import(py, "json")?.call_method1("loads", (value.to_string(),))
}

fn parse<T: serde::de::DeserializeOwned>(value: Value, what: &str) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| failure("malformed-argument", format!("{what}: {e}")))
}

fn lesson(value: &Value) -> Result<LessonConfig, Failure> {
    LessonConfig::from_json(value)
        .map(|(config, _)| config)
        .map_err(|report| failure("invalid-config", report.to_string().trim_end()))
}

fn mode(name: &str) -> Result<DisplayMode, Failure> {
    name.parse().map_err(|e: String| failure("malformed-argument", e))
}

/// Sums, bits and the decision for one presentation of `signals`.
pub fn propagate_json(network: Value, signals: Value) -> Result<Value, Failure> {
    let network: ThresholdNetwork = parse(network, "network")?;
    let report = validate_network(&network);
    if report.has_errors() {
        return Err(failure("invalid-network", report.to_string().trim_end()));
    }
    let signals: Signals = parse(signals, "signals")?;
    let state = network.propagate(&signals).map_err(|e| failure(e.code(), &e))?;
    let decision = network.decision_from(&state);
    Ok(json!({"trace": state.trace, "outputs": decision.outputs, "decision": decision.label()}))
}

fn symbols(tokens: Vec<String>) -> Vec<Symbol> {
    tokens.into_iter().map(Symbol::new).collect()
}

pub fn predict_next_tokens(tokens: Vec<String>) -> Result<String, Failure> {
    let prefix = SequencePrefix::try_from(symbols(tokens)).map_err(|e| failure(e.code(), &e))?;
    Ok(predictors::predict_next(&prefix).as_str().to_string())
}

pub fn surprise_point_json(blocks: Vec<Vec<String>>, plan: Value, horizon: usize) -> Result<Option<usize>, Failure> {
    let spec = PatternSpec {
        blocks: blocks.into_iter().map(symbols).collect(),
        plan: parse::<Vec<PlanStep>>(plan, "plan")?,
    };
    spec.surprise_point(horizon).map_err(|e| failure(e.code(), &e))
}

pub fn card_table_json(payload: Value) -> Result<Value, Failure> {
    let payload: BoxPayload = parse(payload, "payload")?;
    let report = payload.validate();
    if report.has_errors() {
        return Err(failure("invalid-config", report.to_string().trim_end()));
    }
    let rows = table(&payload.prizes, &payload.prior(), &payload.all_cards());
    Ok(serde_json::to_value(rows).expect("tables serialize"))
}

/// A live game session: feed it actions, read views, export or replay its log.
#[pyclass(module = "classplay", name = "Session")]
pub struct PySession {
    inner: classplay_core::Session,
}

#[pymethods]
impl PySession {
    #[new]
    fn new(config: &Bound<'_, PyAny>) -> PyResult<Self> {
        let config = lesson(&to_value(config)?).map_err(raise)?;
        let inner = classplay_core::Session::create(config).map_err(|e| raise(failure(e.code(), &e)))?;
        Ok(PySession { inner })
    }

    /// Rebuilds a session from its config and an exported JSONL log.
    #[staticmethod]
    fn replay(config: &Bound<'_, PyAny>, log: &str) -> PyResult<Self> {
        let config = lesson(&to_value(config)?).map_err(raise)?;
        let events = parse_jsonl(log).map_err(|e| raise(failure("malformed-log", e)))?;
        let inner = classplay_core::Session::replay(config, &events).map_err(|e| raise(failure(e.code(), &e)))?;
        Ok(PySession { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn game(&self) -> String {
        self.inner.config().game.to_string()
    }

    #[getter]
    fn status(&self) -> String {
        self.inner.status().to_string()
    }

    #[getter]
    fn next_seq(&self) -> u64 {
        self.inner.next_seq()
    }

    /// Applies one action and returns its outcome as seen in `view`.
    #[pyo3(signature = (actor, action, view = "teacher"))]
    fn apply<'py>(&mut self, py: Python<'py>, actor: &str, action: &Bound<'py, PyAny>, view: &str) -> PyResult<Bound<'py, PyAny>> {
        let mode = mode(view).map_err(raise)?;
        let action = to_value(action)?;
        let outcome = self.inner.apply_event(actor, action).map_err(|e| raise(failure(e.code(), &e)))?;
        to_py(py, &outcome.view(mode))
    }

    /// Plain-language line for the outcome of the last applied action.
    #[pyo3(signature = (actor, action, view = "teacher"))]
    fn apply_described(&mut self, actor: &str, action: &Bound<'_, PyAny>, view: &str) -> PyResult<String> {
        let mode = mode(view).map_err(raise)?;
        let action = to_value(action)?;
        let outcome = self.inner.apply_event(actor, action).map_err(|e| raise(failure(e.code(), &e)))?;
        Ok(outcome.describe(mode))
    }

    #[pyo3(signature = (mode = "teacher"))]
    fn view<'py>(&self, py: Python<'py>, mode: &str) -> PyResult<Bound<'py, PyAny>> {
        let mode = self::mode(mode).map_err(raise)?;
        to_py(py, &self.inner.view(mode))
    }

    /// State plus RNG position; equal snapshots mean equal sessions.
    fn snapshot<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.snapshot())
    }

    fn export_jsonl(&self) -> String {
        self.inner.export_jsonl()
    }

    fn __repr__(&self) -> String {
        format!("Session(game={}, status={}, next_seq={})", self.game(), self.status(), self.next_seq())
    }
}

/// Diagnostics for a config document: a list of `{severity, field, message}`.
#[pyfunction]
fn validate_config<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let report = classplay_core::validate_config(&to_value(config)?);
    to_py(py, &serde_json::to_value(&report.diagnostics).expect("reports serialize"))
}

#[pyfunction]
fn propagate<'py>(py: Python<'py>, network: &Bound<'py, PyAny>, signals: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let result = propagate_json(to_value(network)?, to_value(signals)?).map_err(raise)?;
    to_py(py, &result)
}

#[pyfunction]
fn minimal_period(tokens: Vec<String>) -> usize {
    predictors::minimal_period(&symbols(tokens))
}

#[pyfunction]
fn predict_next(tokens: Vec<String>) -> PyResult<String> {
    predict_next_tokens(tokens).map_err(raise)
}

/// Blocks of symbols, a plan of `{block, repeat}` steps and a horizon.
#[pyfunction]
fn surprise_point(blocks: Vec<Vec<String>>, plan: &Bound<'_, PyAny>, horizon: usize) -> PyResult<Option<usize>> {
    surprise_point_json(blocks, to_value(plan)?, horizon).map_err(raise)
}

#[pyfunction]
fn neuron_score(rating: [u8; 4]) -> PyResult<u32> {
    let rating = RlidRating::new(rating).map_err(|e| raise(failure(e.code(), &e)))?;
    Ok(score(&rating))
}

/// Best box, expected points and value of every card in a surprise_box payload.
#[pyfunction]
fn card_table<'py>(py: Python<'py>, payload: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let rows = card_table_json(to_value(payload)?).map_err(raise)?;
    to_py(py, &rows)
}

#[pymodule]
fn classplay(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ClassplayError", m.py().get_type::<ClassplayError>())?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(minimal_period, m)?)?;
    m.add_function(wrap_pyfunction!(predict_next, m)?)?;
    m.add_function(wrap_pyfunction!(surprise_point, m)?)?;
    m.add_function(wrap_pyfunction!(neuron_score, m)?)?;
    m.add_function(wrap_pyfunction!(card_table, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lesson_payload(name: &str) -> Value {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../lessons").join(name);
        let config: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        config["payload"].clone()
    }

    #[test]
    fn propagate_reports_trace_and_decision() {
        let payload = lesson_payload("cnn.lesson.json");
        let network = json!({"neurons": payload["neurons"], "connections": payload["connections"]});
        let result = propagate_json(network, json!({"R": 1})).unwrap();
        assert_eq!(result["decision"], "negative");
        assert_eq!(result["trace"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn cyclic_network_is_rejected() {
        let network = json!({
            "neurons": [{"id": "A", "kind": "hidden", "threshold": 1}, {"id": "B", "kind": "output", "threshold": 1}],
            "connections": [{"from": "A", "to": "B", "weight": 1}, {"from": "B", "to": "A", "weight": 1}]
        });
        assert_eq!(propagate_json(network, json!({})).unwrap_err().0, "invalid-network");
    }

    #[test]
    fn predictor_helpers() {
        let six: Vec<String> = ["@", "☺", "$", "@", "☺", "$"].map(String::from).to_vec();
        assert_eq!(predict_next_tokens(six).unwrap(), "@");
        assert!(predict_next_tokens(Vec::new()).is_err());
        let blocks = vec![vec!["@".into(), "☺".into(), "$".into()], vec!["1".into(), "2".into(), "3".into()]];
        let plan = json!([{"block": 0, "repeat": 2}, {"block": 1, "repeat": 1}]);
        assert_eq!(surprise_point_json(blocks, plan, 18).unwrap(), Some(6));
    }

    #[test]
    fn card_table_rows() {
        let rows = card_table_json(lesson_payload("surprise_box.lesson.json")).unwrap();
        assert_eq!(rows.as_array().unwrap().len(), 8);
        assert_eq!(rows[2]["ev"], 91.5);
        assert_eq!(card_table_json(json!({"prizes": 3})).unwrap_err().0, "malformed-argument");
    }
}
