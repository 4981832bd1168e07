//! Python bindings. Records, explanations and queries cross the boundary
//! as plain dicts with the same shape as the JSON wire format.

use std::sync::Arc;

use hrc_explain::explain::{explain, resolve_record, DialogueMemory};
use hrc_explain::query::{parse, to_structured};
use hrc_explain::safety::{make_decision, Behavior, SafetyState};
use hrc_explain::session::{RunStatus, Session as CoreSession, SessionError};
use hrc_explain::sim::{load_scenario, load_scenario_file, Scenario as CoreScenario};
use hrc_explain::trace::{verify, Trace, TraceError};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn session_err(e: SessionError) -> PyErr {
    match e {
        SessionError::Trace(_) | SessionError::Safety(_) => PyRuntimeError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let text: String = if obj.is_instance_of::<PyString>() {
        obj.extract()?
    } else {
        py.import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(value_err)
}

fn behavior(name: &str) -> PyResult<Behavior> {
    name.parse().map_err(value_err)
}

fn load_trace(text: &str) -> PyResult<Trace> {
    Trace::deserialize(text.as_bytes()).map_err(|e| match e {
        TraceError::Envelope { .. } => PyRuntimeError::new_err(e.to_string()),
        other => value_err(other),
    })
}

/// A validated scenario.
#[pyclass(frozen, from_py_object, module = "hrc_explain")]
#[derive(Clone)]
pub struct Scenario {
    inner: Arc<CoreScenario>,
}

#[pymethods]
impl Scenario {
    /// The bundled beam transport episode.
    #[staticmethod]
    fn bundled() -> Self {
        Self {
            inner: Arc::new(CoreScenario::beam_transport()),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(load_scenario(text).map_err(value_err)?),
        })
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(load_scenario_file(&path).map_err(value_err)?),
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn horizon(&self) -> u64 {
        self.inner.horizon
    }

    #[getter]
    fn tick_duration(&self) -> f64 {
        self.inner.tick_duration
    }

    #[getter]
    fn params(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &*self.inner.params)
    }

    #[getter]
    fn params_hash(&self) -> String {
        self.inner.params.content_hash()
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, horizon={})", self.inner.name, self.inner.horizon)
    }
}

/// A live dialogue session: the simulated world, its trace and the
/// conversation memory.
#[pyclass(module = "hrc_explain")]
pub struct Session {
    inner: CoreSession,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (scenario = None, session_id = None))]
    fn new(scenario: Option<Scenario>, session_id: Option<String>) -> Self {
        let scenario = scenario.unwrap_or_else(Scenario::bundled).inner;
        let id = session_id.unwrap_or_else(|| scenario.name.clone());
        Self {
            inner: CoreSession::new(id, scenario),
        }
    }

    #[getter]
    fn session_id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn tick_count(&self) -> u64 {
        self.inner.world().tick()
    }

    #[getter]
    fn status(&self) -> &'static str {
        match self.inner.status() {
            RunStatus::Idle => "idle",
            RunStatus::Running => "running",
            RunStatus::PausedByUser => "paused_by_user",
            RunStatus::Finished => "finished",
        }
    }

    #[getter]
    fn stop_held(&self) -> bool {
        self.inner.stop_held()
    }

    #[getter]
    fn params_hash(&self) -> &str {
        self.inner.trace().params_hash()
    }

    /// Runs one tick; `None` once the scenario has finished.
    fn tick(&mut self, py: Python<'_>) -> PyResult<Option<Py<PyAny>>> {
        match self.inner.tick().map_err(session_err)? {
            Some(r) => Ok(Some(to_py(py, &r)?)),
            None => Ok(None),
        }
    }

    /// Runs up to `n` ticks (to the horizon when omitted).
    #[pyo3(signature = (n = None))]
    fn run(&mut self, py: Python<'_>, n: Option<u64>) -> PyResult<Py<PyAny>> {
        let records = self.inner.run(n.unwrap_or(u64::MAX)).map_err(session_err)?;
        to_py(py, &records)
    }

    /// Answers a question given as text or as a structured query dict.
    /// Never advances the world.
    fn ask(&mut self, py: Python<'_>, query: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let e = if let Ok(text) = query.extract::<String>() {
            self.inner.ask_text(&text)
        } else {
            let value = from_py(py, query)?;
            self.inner.ask_structured(&value)
        }
        .map_err(session_err)?;
        to_py(py, &e)
    }

    /// Commands a behavior; `None` means the one offered by the last
    /// what-if. Takes one tick.
    #[pyo3(signature = (behavior = None))]
    fn command(&mut self, py: Python<'_>, behavior: Option<&str>) -> PyResult<Py<PyAny>> {
        let behavior = behavior.map(self::behavior).transpose()?;
        let outcome = self.inner.command(behavior).map_err(session_err)?;
        to_py(py, &outcome)
    }

    /// Current world state as a dict.
    fn state(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.world().snapshot(self.inner.scenario()))
    }

    fn records(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.trace().records())
    }

    fn memory(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.inner.memory())
    }

    /// The trace in its `.trace.jsonl` form.
    fn trace_jsonl(&self) -> String {
        String::from_utf8(self.inner.trace().serialize()).expect("trace is UTF-8")
    }

    fn __repr__(&self) -> String {
        format!("Session(id={:?}, tick={})", self.inner.id(), self.inner.world().tick())
    }
}

/// Parses a query string into its structured dict form.
#[pyfunction]
fn parse_query(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let ast = parse(text).map_err(value_err)?;
    to_py(py, &to_structured(&ast))
}

/// Arbitrates one safety state (dict) under a nominal behavior and
/// returns the decision record.
#[pyfunction]
fn decide(py: Python<'_>, state: &Bound<'_, PyAny>, nominal: &str) -> PyResult<Py<PyAny>> {
    let state: SafetyState = serde_json::from_value(from_py(py, state)?).map_err(value_err)?;
    let record = make_decision(&state, behavior(nominal)?).map_err(value_err)?;
    to_py(py, &record)
}

/// Re-certifies every record of a `.trace.jsonl` text; one dict per record.
#[pyfunction]
fn verify_trace(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &verify(&load_trace(text)?))
}

/// Answers a question about a recorded trace without a live session.
#[pyfunction]
#[pyo3(signature = (text, query, at = None))]
fn ask_trace(py: Python<'_>, text: &str, query: &str, at: Option<i64>) -> PyResult<Py<PyAny>> {
    let trace = load_trace(text)?;
    let mut ast = parse(query).map_err(value_err)?;
    if at.is_some() {
        ast.at = at;
    }
    let record = resolve_record(&trace, ast.at).map_err(value_err)?;
    let (e, _) = explain(record, &ast, &DialogueMemory::new(trace.session_id())).map_err(value_err)?;
    to_py(py, &e)
}

#[pymodule(name = "hrc_explain")]
pub fn python_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(parse_query, m)?)?;
    m.add_function(wrap_pyfunction!(decide, m)?)?;
    m.add_function(wrap_pyfunction!(verify_trace, m)?)?;
    m.add_function(wrap_pyfunction!(ask_trace, m)?)?;
    Ok(())
}
