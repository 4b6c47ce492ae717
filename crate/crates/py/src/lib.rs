//! Python bindings. Structured results cross the boundary as JSON-compatible
//! dicts and lists.

use asmstarve_core::analysis::{certify_starvation_free, compute_risky_functions, Mode};
use asmstarve_core::exec::{
    enumerate_interleavings, run_distributed, EnvironmentScript, Scheduler, DEFAULT_STATE_BUDGET,
};
use asmstarve_core::lang::{parse_model, pretty_print, validate_model, Model};
use asmstarve_core::models::{self, AodvParams, DpVariant, Topology};
use asmstarve_core::monitor::{detect_cyclical_return, progress_summary, AnnotatedTrace, RunLength};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (v.to_string(),))?.unbind())
}

/// A parsed model.
#[pyclass(name = "Model", module = "asmstarve", frozen)]
struct PyModel {
    inner: Model,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = parse_model(text).map_err(|diags| {
            value_err(diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))
        })?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn predicates(&self) -> Vec<String> {
        self.inner.predicates.keys().cloned().collect()
    }

    #[getter]
    fn agents(&self) -> PyResult<Vec<String>> {
        Ok(self.inner.agent_instances().map_err(value_err)?.iter().map(|a| a.name()).collect())
    }

    /// Validation diagnostics as dicts.
    fn validate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let diags = validate_model(&self.inner);
        to_py(py, &serde_json::to_value(diags).map_err(value_err)?)
    }

    fn pretty(&self) -> String {
        pretty_print(&self.inner)
    }

    fn risky_functions(&self) -> Vec<String> {
        compute_risky_functions(&self.inner).names().into_iter().collect()
    }

    /// Vulnerability report. `mode` is "syntactic" or "exploration".
    #[pyo3(signature = (mode = "syntactic", depth = 12, budget = DEFAULT_STATE_BUDGET, env = None))]
    fn analyze(&self, py: Python<'_>, mode: &str, depth: usize, budget: usize, env: Option<&str>) -> PyResult<Py<PyAny>> {
        let mode = match mode {
            "syntactic" => Mode::Syntactic,
            "exploration" => Mode::Exploration { depth, budget },
            other => return Err(value_err(format!("unknown mode `{other}`"))),
        };
        let env = self.env(env)?;
        let report = certify_starvation_free(&self.inner, &env, mode).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        to_py(py, &report.to_json())
    }

    /// Runs the model and returns the trace as JSON lines.
    #[pyo3(signature = (steps = 100, scheduler = "round-robin", seed = 0, script = None, env = None))]
    fn run(
        &self,
        steps: usize,
        scheduler: &str,
        seed: u64,
        script: Option<Vec<String>>,
        env: Option<&str>,
    ) -> PyResult<String> {
        let sch = match (scheduler, script) {
            ("round-robin", _) => Scheduler::RoundRobin,
            ("random", _) => Scheduler::Random { seed },
            ("scripted", Some(names)) => Scheduler::Scripted(names),
            ("scripted", None) => return Err(value_err("the scripted scheduler needs `script`")),
            (other, _) => return Err(value_err(format!("unknown scheduler `{other}`"))),
        };
        let env = self.env(env)?;
        let trace = run_distributed(&self.inner, &sch, &env, steps).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let mut buf = Vec::new();
        trace.write_jsonl(&self.inner, &mut buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Explores all interleavings; returns state/edge counts and clashes.
    #[pyo3(signature = (depth = 12, budget = DEFAULT_STATE_BUDGET, env = None))]
    fn explore(&self, py: Python<'_>, depth: usize, budget: usize, env: Option<&str>) -> PyResult<Py<PyAny>> {
        let env = self.env(env)?;
        let g = enumerate_interleavings(&self.inner, &env, depth, budget).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let clashes: Vec<String> = g.inconsistent.iter().map(|m| format!("{}: {}", m.agent, m.clash)).collect();
        to_py(
            py,
            &serde_json::json!({
                "states": g.len(),
                "edges": g.edges.len(),
                "truncated": g.truncated,
                "inconsistent": clashes,
                "deadlocks": g.dead_ends(),
            }),
        )
    }

    fn __repr__(&self) -> String {
        format!("Model({:?})", self.inner.name)
    }
}

impl PyModel {
    fn env(&self, text: Option<&str>) -> PyResult<EnvironmentScript> {
        match text {
            Some(t) => EnvironmentScript::from_json(&self.inner.sig, t).map_err(value_err),
            None => Ok(EnvironmentScript::new()),
        }
    }
}

/// Cyclical-return alarms over a JSON-lines trace.
#[pyfunction]
#[pyo3(signature = (trace, predicate, threshold = 20, global_steps = false))]
fn monitor(py: Python<'_>, trace: &str, predicate: &str, threshold: usize, global_steps: bool) -> PyResult<Py<PyAny>> {
    let at = AnnotatedTrace::from_jsonl(trace).map_err(value_err)?;
    let counting = if global_steps { RunLength::GlobalSteps } else { RunLength::AgentMoves };
    let alarms = detect_cyclical_return(&at, predicate, threshold, counting).map_err(value_err)?;
    let progress = progress_summary(&at, counting);
    to_py(py, &serde_json::json!({ "alarms": alarms, "progress": progress }))
}

#[pyfunction]
#[pyo3(signature = (n = 5, bakery = false))]
fn dining_philosophers(n: usize, bakery: bool) -> PyResult<PyModel> {
    let variant = if bakery { DpVariant::Bakery } else { DpVariant::Baseline };
    Ok(PyModel {
        inner: models::build_dining_philosophers(n, variant).map_err(value_err)?,
    })
}

/// Returns the model and its environment script as JSON text.
#[pyfunction]
#[pyo3(signature = (hosts = 2, topology = "none", timeout = None))]
fn aodv(hosts: usize, topology: &str, timeout: Option<i64>) -> PyResult<(PyModel, String)> {
    let topo: Topology = topology.parse().map_err(value_err)?;
    let mut p = AodvParams::new(hosts, topo);
    if let Some(t) = timeout {
        p = p.with_timeout(t);
    }
    let (inner, env) = models::build_aodv(&p).map_err(value_err)?;
    Ok((PyModel { inner }, env.to_json().to_string()))
}

/// Bundled corpus entry names.
#[pyfunction]
fn corpus() -> Vec<String> {
    models::corpus().into_iter().map(|e| e.name).collect()
}

/// A bundled entry's model and environment script (JSON text, or None).
#[pyfunction]
fn corpus_entry(name: &str) -> PyResult<(PyModel, Option<String>)> {
    let entry = models::corpus_entry(name).map_err(value_err)?;
    let env = entry.env.as_deref().and_then(models::corpus_file).map(str::to_string);
    Ok((PyModel { inner: entry.parse() }, env))
}

#[pymodule]
fn asmstarve(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(monitor, m)?)?;
    m.add_function(wrap_pyfunction!(dining_philosophers, m)?)?;
    m.add_function(wrap_pyfunction!(aodv, m)?)?;
    m.add_function(wrap_pyfunction!(corpus, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_entry, m)?)?;
    Ok(())
}
