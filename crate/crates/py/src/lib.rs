//! Python bindings. Fields cross the boundary as flat lists in grid order
//! (row-major, last axis fastest).

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use chemostokes::harness::snapshot::{read_snapshot, write_snapshot};
use chemostokes::harness::study::{epsilon_study, refinement_study, ConvergenceTable};
use chemostokes::regularization::{self, DiffusionLaw};
use chemostokes::timestepper;
use chemostokes::{grid, Error, SimConfig, SimState};

create_exception!(chemostokes, BlowUpError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        3 => BlowUpError::new_err(e.to_string()),
        4 => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A validated run configuration.
#[pyclass(name = "Config", module = "chemostokes", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyConfig {
    inner: SimConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn load(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        SimConfig::load(&path, &overrides).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        SimConfig::from_toml(text).map(|inner| Self { inner }).map_err(to_py)
    }

    fn echo(&self) -> String {
        self.inner.echo()
    }

    fn with_eps(&self, eps: f64) -> PyResult<Self> {
        self.inner.with_eps(eps).map(|inner| Self { inner }).map_err(to_py)
    }

    fn with_resolution(&self, resolution: Vec<usize>) -> PyResult<Self> {
        self.inner.with_resolution(resolution).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.domain.dim
    }

    #[getter]
    fn resolution(&self) -> Vec<usize> {
        self.inner.domain.resolution.clone()
    }

    #[getter]
    fn lengths(&self) -> Vec<f64> {
        self.inner.domain.lengths.clone()
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.law.eps
    }

    #[getter]
    fn cutoff(&self) -> f64 {
        self.inner.sensitivity.cutoff_eps()
    }

    fn initial_state(&self) -> PyResult<PyState> {
        self.inner.initial_state().map(PyState).map_err(to_py)
    }

    /// Raw sensitivity tensor at position `x` as a list of rows.
    fn eval_s(&self, x: Vec<f64>, n: f64, c: f64) -> PyResult<Vec<Vec<f64>>> {
        regularization::eval_s(&self.inner.sensitivity, &x, n, c)
            .map(|t| t.rows())
            .map_err(to_py)
    }

    /// Sensitivity with the boundary cutoff applied.
    fn eval_s_eps(&self, x: Vec<f64>, n: f64, c: f64) -> PyResult<Vec<Vec<f64>>> {
        regularization::eval_s_eps(&self.inner.sensitivity, &x, n, c, &self.inner.domain.lengths)
            .map(|t| t.rows())
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(dim={}, resolution={:?}, m={}, eps={})",
            self.inner.domain.dim, self.inner.domain.resolution, self.inner.law.m, self.inner.law.eps
        )
    }
}

/// Simulation state: density, oxygen, face velocities and pressure.
#[pyclass(name = "State", module = "chemostokes", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyState(SimState);

#[pymethods]
impl PyState {
    #[getter]
    fn t(&self) -> f64 {
        self.0.t
    }

    #[getter]
    fn resolution(&self) -> Vec<usize> {
        let g = self.0.grid();
        g.resolution()[..g.dim()].to_vec()
    }

    #[getter]
    fn n(&self) -> Vec<f64> {
        self.0.n.values().to_vec()
    }

    #[getter]
    fn c(&self) -> Vec<f64> {
        self.0.c.values().to_vec()
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.0.p.values().to_vec()
    }

    /// One list per axis, each over that axis' faces.
    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        self.0.u.components().to_vec()
    }

    fn mass(&self) -> f64 {
        grid::integrate(&self.0.n)
    }

    fn __repr__(&self) -> String {
        format!("State(t={}, resolution={:?})", self.0.t, self.resolution())
    }
}

/// Trajectory of a completed run.
#[pyclass(name = "RunResult", module = "chemostokes", frozen)]
pub struct PyRunResult {
    #[pyo3(get)]
    records: Vec<HashMap<String, f64>>,
    #[pyo3(get)]
    snapshots: Vec<PyState>,
    #[pyo3(get)]
    final_state: PyState,
    #[pyo3(get)]
    steps: usize,
}

fn table_rows(table: ConvergenceTable) -> Vec<HashMap<String, Option<f64>>> {
    table
        .rows
        .into_iter()
        .map(|r| {
            HashMap::from([
                (table.parameter_name.clone(), Some(r.parameter)),
                ("distance".to_string(), r.distance),
                ("ratio".to_string(), r.ratio),
                ("order".to_string(), r.order),
            ])
        })
        .collect()
}

#[pyfunction]
fn run(py: Python<'_>, config: &PyConfig) -> PyResult<PyRunResult> {
    let cfg = config.inner.clone();
    let out = py.detach(move || timestepper::run(&cfg)).map_err(to_py)?;
    Ok(PyRunResult {
        records: out
            .records
            .iter()
            .map(|r| r.column_names().into_iter().zip(r.values()).collect())
            .collect(),
        snapshots: out.snapshots.into_iter().map(PyState).collect(),
        final_state: PyState(out.final_state),
        steps: out.steps,
    })
}

#[pyfunction]
fn stable_dt(state: &PyState, config: &PyConfig) -> PyResult<f64> {
    timestepper::stable_dt(&state.0, &config.inner).map_err(to_py)
}

#[pyfunction]
fn step(state: &PyState, config: &PyConfig, dt: f64) -> PyResult<PyState> {
    timestepper::step(&state.0, &config.inner, dt).map(PyState).map_err(to_py)
}

#[pyfunction]
fn eps_study(py: Python<'_>, config: &PyConfig, eps: Vec<f64>) -> PyResult<Vec<HashMap<String, Option<f64>>>> {
    let cfg = config.inner.clone();
    py.detach(move || epsilon_study(&cfg, &eps)).map(table_rows).map_err(to_py)
}

#[pyfunction]
fn refine(
    py: Python<'_>,
    config: &PyConfig,
    resolutions: Vec<Vec<usize>>,
) -> PyResult<Vec<HashMap<String, Option<f64>>>> {
    let cfg = config.inner.clone();
    py.detach(move || refinement_study(&cfg, &resolutions))
        .map(table_rows)
        .map_err(to_py)
}

#[pyfunction]
fn save_snapshot(state: &PyState, path: PathBuf) -> PyResult<()> {
    write_snapshot(&state.0, &path).map_err(to_py)
}

/// Reads a snapshot onto the mesh of `config`.
#[pyfunction]
fn load_snapshot(path: PathBuf, config: &PyConfig) -> PyResult<PyState> {
    let g = grid::make_grid(&config.inner.domain).map_err(to_py)?;
    read_snapshot(&path, &g).map(PyState).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (n, m, c_d = 1.0, eps = 0.0))]
fn d_eps(n: f64, m: f64, c_d: f64, eps: f64) -> PyResult<f64> {
    let law = DiffusionLaw::new(m, c_d, eps).map_err(to_py)?;
    law.d_eps(n).map_err(to_py)
}

#[pyfunction]
fn rho_eps(x: Vec<f64>, lengths: Vec<f64>, cutoff: f64) -> PyResult<f64> {
    regularization::rho_eps(&x, &lengths, cutoff).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "chemostokes")]
fn chemostokes_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyRunResult>()?;
    m.add("BlowUpError", m.py().get_type::<BlowUpError>())?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(stable_dt, m)?)?;
    m.add_function(wrap_pyfunction!(step, m)?)?;
    m.add_function(wrap_pyfunction!(eps_study, m)?)?;
    m.add_function(wrap_pyfunction!(refine, m)?)?;
    m.add_function(wrap_pyfunction!(save_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(load_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(d_eps, m)?)?;
    m.add_function(wrap_pyfunction!(rho_eps, m)?)?;
    Ok(())
}
