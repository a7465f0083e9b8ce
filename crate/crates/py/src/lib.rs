//! Python bindings for the satlae simulator.
//!
//! Experiment functions return lists of dicts keyed by CSV column name, with
//! `None` where the CSV has `NA`. Simulator errors surface as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use satlae::antenna::{element_gain_db as gain_db, BeamPattern};
use satlae::cli::{parse_scenario, parse_scenario_str, to_text};
use satlae::engine::{self, Cell, ExperimentResult, ScenarioConfig};

fn to_py_err(e: satlae::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A validated scenario. Defaults reproduce the two-fleet case study.
#[pyclass(name = "Scenario", module = "satlae_py")]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    #[new]
    fn new() -> Self {
        Self {
            inner: ScenarioConfig::default(),
        }
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let parsed = parse_scenario(path).map_err(to_py_err)?;
        Ok(Self {
            inner: parsed.config,
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let parsed = parse_scenario_str(text).map_err(to_py_err)?;
        Ok(Self {
            inner: parsed.config,
        })
    }

    /// Normalized scenario text; parses back to an identical scenario.
    fn to_text(&self) -> String {
        to_text(&self.inner)
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self {
            inner: self.inner.with_seed(seed),
        }
    }

    #[getter]
    fn horizon_slots(&self) -> usize {
        self.inner.horizon_slots
    }

    #[getter]
    fn power_w(&self) -> f64 {
        self.inner.power_w
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.master_seed
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(fingerprint={}, slots={}, power_w={}, policy={})",
            self.inner.fingerprint(),
            self.inner.horizon_slots,
            self.inner.power_w,
            self.inner.policy.label()
        )
    }
}

fn table<'py>(py: Python<'py>, result: &ExperimentResult) -> PyResult<Bound<'py, PyList>> {
    let out = PyList::empty(py);
    for row in &result.rows {
        let d = PyDict::new(py);
        for (name, cell) in result.columns().iter().zip(row) {
            match cell {
                Cell::Int(i) => d.set_item(name, i)?,
                Cell::Float(f) => d.set_item(name, f)?,
                Cell::Text(s) => d.set_item(name, s)?,
                Cell::Bool(b) => d.set_item(name, b)?,
                Cell::Na => d.set_item(name, py.None())?,
            }
        }
        d.set_item("fingerprint", &result.fingerprint)?;
        out.append(d)?;
    }
    Ok(out)
}

fn config_of(scenario: Option<&PyScenario>) -> ScenarioConfig {
    scenario.map(|s| s.inner.clone()).unwrap_or_default()
}

#[pyfunction]
fn fspl_db(distance_km: f64, freq_ghz: f64) -> PyResult<f64> {
    satlae::channel::fspl_db(distance_km, freq_ghz).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (psi_deg, peak_dbi=37.5, half_beamwidth_deg=1.14, sidelobe_db=25.0))]
fn element_gain_db(
    psi_deg: f64,
    peak_dbi: f64,
    half_beamwidth_deg: f64,
    sidelobe_db: f64,
) -> PyResult<f64> {
    let pattern = BeamPattern {
        peak_gain_dbi: peak_dbi,
        half_beamwidth_deg,
        sidelobe_suppression_db: sidelobe_db,
    };
    pattern.validate().map_err(to_py_err)?;
    Ok(gain_db(psi_deg, &pattern))
}

/// Per-slot metrics of the scenario's configured policy.
#[pyfunction]
#[pyo3(signature = (scenario=None))]
fn run<'py>(py: Python<'py>, scenario: Option<&PyScenario>) -> PyResult<Bound<'py, PyList>> {
    let cfg = config_of(scenario);
    let r = py.detach(|| engine::run_table(&cfg)).map_err(to_py_err)?;
    table(py, &r)
}

#[pyfunction]
#[pyo3(signature = (powers, scenario=None))]
fn sweep_power<'py>(
    py: Python<'py>,
    powers: Vec<f64>,
    scenario: Option<&PyScenario>,
) -> PyResult<Bound<'py, PyList>> {
    let cfg = config_of(scenario);
    let r = py
        .detach(|| engine::power_sweep(&cfg, &powers, &engine::sweep_policies(&cfg)))
        .map_err(to_py_err)?;
    table(py, &r)
}

#[pyfunction]
#[pyo3(signature = (targets, scenario=None))]
fn min_power<'py>(
    py: Python<'py>,
    targets: Vec<f64>,
    scenario: Option<&PyScenario>,
) -> PyResult<Bound<'py, PyList>> {
    let cfg = config_of(scenario);
    let r = py
        .detach(|| engine::min_power_experiment(&cfg, &targets))
        .map_err(to_py_err)?;
    table(py, &r)
}

#[pyfunction]
#[pyo3(signature = (targets, scenario=None))]
fn service<'py>(
    py: Python<'py>,
    targets: Vec<f64>,
    scenario: Option<&PyScenario>,
) -> PyResult<Bound<'py, PyList>> {
    let cfg = config_of(scenario);
    let r = py
        .detach(|| engine::service_experiment(&cfg, &targets))
        .map_err(to_py_err)?;
    table(py, &r)
}

/// Returns `(summary, trace)`.
#[pyfunction]
#[pyo3(signature = (frames, scenario=None))]
fn compare_timescales<'py>(
    py: Python<'py>,
    frames: Vec<usize>,
    scenario: Option<&PyScenario>,
) -> PyResult<(Bound<'py, PyList>, Bound<'py, PyList>)> {
    let cfg = config_of(scenario);
    let r = py
        .detach(|| engine::timescale_experiment(&cfg, &frames))
        .map_err(to_py_err)?;
    Ok((table(py, &r.summary)?, table(py, &r.trace)?))
}

#[pymodule]
fn satlae_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(fspl_db, m)?)?;
    m.add_function(wrap_pyfunction!(element_gain_db, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_power, m)?)?;
    m.add_function(wrap_pyfunction!(min_power, m)?)?;
    m.add_function(wrap_pyfunction!(service, m)?)?;
    m.add_function(wrap_pyfunction!(compare_timescales, m)?)?;
    Ok(())
}
