//! Python bindings: weights, walks, trajectory records, martingale checks
//! and the minimization problem.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use vrrw_core::config::ExperimentConfig;
use vrrw_core::experiments::{max_relative_drift, run_config as core_run_config};
use vrrw_core::lemma::{self, BVector, GridSpec, LemmaInstance, MinimizeOptions};
use vrrw_core::martingale::{self as mg, AParams, DEFAULT_TOL};
use vrrw_core::walk::{self, RecordOptions, Walker};
use vrrw_core::{StopRule, StreamSeed, TrajectoryRecord, WeightFunction};

fn to_py(e: vrrw_core::Error) -> PyErr {
    match e {
        vrrw_core::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn params(eps: f64) -> PyResult<AParams> {
    AParams::new(eps, DEFAULT_TOL).map_err(to_py)
}

/// A weight function `w(k)` of the local time.
#[pyclass(name = "Weight", frozen)]
struct PyWeight(WeightFunction);

#[pymethods]
impl PyWeight {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(PyWeight).map_err(to_py)
    }

    fn __call__(&self, k: u64) -> f64 {
        self.0.eval(k)
    }

    fn ln(&self, k: u64) -> f64 {
        self.0.ln_eval(k)
    }

    #[getter]
    fn spec(&self) -> String {
        self.0.spec().to_string()
    }

    fn __repr__(&self) -> String {
        format!("Weight('{}')", self.0.spec())
    }
}

/// A walk driven by the random stream `(master, index)`.
#[pyclass(name = "Walk")]
struct PyWalk {
    w: WeightFunction,
    seed: StreamSeed,
    walker: Walker,
    moves: Vec<vrrw_core::Step>,
}

#[pymethods]
impl PyWalk {
    #[new]
    #[pyo3(signature = (weight, master=0, index=0, targets=Vec::new()))]
    fn new(weight: &str, master: u64, index: u64, targets: Vec<i64>) -> PyResult<Self> {
        let seed = StreamSeed::new(master, index);
        Ok(Self {
            w: weight.parse().map_err(to_py)?,
            seed,
            walker: Walker::new(seed, &targets),
            moves: Vec::new(),
        })
    }

    /// Takes one step; returns -1 or +1.
    fn step(&mut self) -> i64 {
        let s = self.walker.advance(&self.w);
        self.moves.push(s);
        s.delta()
    }

    /// Takes `n` steps; returns the final position.
    fn run(&mut self, n: u64) -> i64 {
        for _ in 0..n {
            let s = self.walker.advance(&self.w);
            self.moves.push(s);
        }
        self.walker.state.position()
    }

    #[getter]
    fn position(&self) -> i64 {
        self.walker.state.position()
    }

    #[getter]
    fn n(&self) -> u64 {
        self.walker.state.n()
    }

    #[getter]
    fn min(&self) -> i64 {
        self.walker.state.min()
    }

    #[getter]
    fn max(&self) -> i64 {
        self.walker.state.max()
    }

    #[getter]
    fn returns_to_origin(&self) -> u64 {
        self.walker.state.returns_to_origin()
    }

    fn local_time(&self, x: i64) -> u64 {
        self.walker.state.local_time(x)
    }

    /// `(up, down)` crossings of the edge `{z, z+1}`.
    fn crossing_counts(&self, z: i64) -> (u64, u64) {
        self.walker.state.crossing_counts(z)
    }

    fn hitting_time(&self, y: i64) -> Option<u64> {
        self.walker.state.hitting_time(y)
    }

    fn prob_right(&self) -> f64 {
        self.walker.state.prob_right(&self.w)
    }

    fn check_invariants(&self) -> PyResult<()> {
        self.walker.state.check_invariants().map_err(to_py)
    }

    fn record(&self) -> PyRecord {
        PyRecord(TrajectoryRecord {
            seed: self.seed,
            weight: self.w.spec().clone(),
            moves: self.moves.clone(),
            prob_right: None,
        })
    }
}

/// A stored trajectory: seed, weight spec and move sequence.
#[pyclass(name = "Record", frozen)]
struct PyRecord(TrajectoryRecord);

#[pymethods]
impl PyRecord {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        vrrw_core::record::read(&path).map(PyRecord).map_err(to_py)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        vrrw_core::record::decode(data).map(PyRecord).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        vrrw_core::record::write(&path, &self.0).map_err(to_py)
    }

    fn to_bytes(&self) -> Vec<u8> {
        vrrw_core::record::encode(&self.0)
    }

    #[getter]
    fn master(&self) -> u64 {
        self.0.seed.master
    }

    #[getter]
    fn index(&self) -> u64 {
        self.0.seed.index
    }

    #[getter]
    fn weight(&self) -> String {
        self.0.weight.to_string()
    }

    /// Moves as 0 (left) / 1 (right).
    #[getter]
    fn moves(&self) -> Vec<u8> {
        self.0.moves.iter().map(|&s| s as u8).collect()
    }

    fn positions(&self) -> Vec<i64> {
        self.0.positions()
    }

    fn __len__(&self) -> usize {
        self.0.moves.len()
    }

    /// First index where re-simulation disagrees, or None.
    fn replay_mismatch(&self) -> PyResult<Option<usize>> {
        walk::replay_mismatch(&self.0).map_err(to_py)
    }

    /// `M_0, ..., M_n` along the record.
    fn martingale_path(&self, eps: f64) -> PyResult<Vec<f64>> {
        let w = WeightFunction::new(self.0.weight.clone()).map_err(to_py)?;
        let mut state = vrrw_core::WalkState::new();
        let mut m = vrrw_core::MartingaleState::new(eps).map_err(to_py)?;
        let mut out = Vec::with_capacity(self.0.moves.len() + 1);
        out.push(m.value());
        for &s in &self.0.moves {
            m.update(&state, s, &w);
            state.apply(s);
            out.push(m.value());
        }
        Ok(out)
    }

    fn max_relative_drift(&self, eps: f64) -> PyResult<f64> {
        let w = WeightFunction::new(self.0.weight.clone()).map_err(to_py)?;
        max_relative_drift(&self.0, eps, &w).map_err(to_py)
    }

    /// Dict with `incremental`, `exact`, `literal`, `correction`.
    fn decompose(&self, py: Python<'_>, eps: f64) -> PyResult<Py<PyAny>> {
        let w = WeightFunction::new(self.0.weight.clone()).map_err(to_py)?;
        let d = mg::decompose(&self.0, self.0.moves.len(), eps, &w).map_err(to_py)?;
        let out = pyo3::types::PyDict::new(py);
        out.set_item("incremental", d.incremental)?;
        out.set_item("exact", d.exact)?;
        out.set_item("literal", d.literal)?;
        out.set_item("correction", d.correction)?;
        out.set_item("min_position", d.min_position)?;
        out.set_item("underflows", d.underflows)?;
        Ok(out.into_any().unbind())
    }

    /// `(uniform, partial)` log margins of the increment lower bounds at
    /// the end of the record. Raises ValueError if `-y` was reached.
    fn delta_bound_margin(&self, y: u64, eps: f64) -> PyResult<(f64, f64)> {
        let w = WeightFunction::new(self.0.weight.clone()).map_err(to_py)?;
        let m = mg::delta_bound_margin(&self.0, y, self.0.moves.len(), params(eps)?, &w)
            .map_err(to_py)?;
        Ok((m.uniform, m.partial))
    }

    /// `(tau_v, M at tau_v, bound)`.
    fn stopped_lower_bound(&self, y: u64, v: u64, eps: f64) -> PyResult<(u64, f64, f64)> {
        let w = WeightFunction::new(self.0.weight.clone()).map_err(to_py)?;
        let b = mg::stopped_lower_bound(&self.0, y, v, params(eps)?, &w).map_err(to_py)?;
        Ok((b.tau_v, b.m_at_tau, b.bound))
    }

    fn __repr__(&self) -> String {
        format!(
            "Record(weight='{}', master={}, index={}, moves={})",
            self.0.weight,
            self.0.seed.master,
            self.0.seed.index,
            self.0.moves.len()
        )
    }
}

/// Simulates `horizon` steps on stream `(master, index)`.
#[pyfunction]
#[pyo3(signature = (weight, horizon, master=0, index=0))]
fn simulate(weight: &str, horizon: u64, master: u64, index: u64) -> PyResult<PyRecord> {
    let w: WeightFunction = weight.parse().map_err(to_py)?;
    let opts = RecordOptions {
        moves: true,
        prob_right: false,
    };
    let (_, rec) = vrrw_core::run_trajectory(
        &w,
        &StopRule::horizon(horizon),
        StreamSeed::new(master, index),
        &[],
        opts,
    )
    .map_err(to_py)?;
    Ok(PyRecord(rec.expect("moves recorded")))
}

#[pyfunction]
#[pyo3(signature = (x, eps=0.05))]
fn a_coeff(x: i64, eps: f64) -> f64 {
    mg::a_coeff(x, eps)
}

#[pyfunction]
#[pyo3(signature = (k, eps=0.05))]
fn big_a(k: u64, eps: f64) -> PyResult<f64> {
    mg::big_a(k, eps, DEFAULT_TOL).map_err(to_py)
}

#[pyfunction]
fn evaluate_sum(b: Vec<f64>, alpha: f64, eps: f64) -> PyResult<f64> {
    let inst = LemmaInstance::new(b.len().saturating_sub(1), alpha, eps).map_err(to_py)?;
    lemma::evaluate_sum(&BVector::new(b).map_err(to_py)?, &inst).map_err(to_py)
}

/// `(value, b, converged)` from the multi-start descent.
#[pyfunction]
#[pyo3(signature = (k, alpha, eps, restarts=24, seed=0x5eed))]
fn minimize(
    py: Python<'_>,
    k: usize,
    alpha: f64,
    eps: f64,
    restarts: usize,
    seed: u64,
) -> PyResult<(f64, Vec<f64>, bool)> {
    let inst = LemmaInstance::new(k, alpha, eps).map_err(to_py)?;
    let opts = MinimizeOptions {
        restarts,
        seed,
        ..MinimizeOptions::default()
    };
    let r = py
        .detach(|| lemma::local_minimize(&inst, opts))
        .map_err(to_py)?;
    Ok((r.value, r.b.into_inner(), r.converged))
}

/// `(value, b)` from the exhaustive grid (K <= 3).
#[pyfunction]
#[pyo3(signature = (k, alpha, eps, refined=true))]
fn grid_minimum(k: usize, alpha: f64, eps: f64, refined: bool) -> PyResult<(f64, Vec<f64>)> {
    let inst = LemmaInstance::new(k, alpha, eps).map_err(to_py)?;
    let grid = if refined {
        GridSpec::refined()
    } else {
        GridSpec::coarse()
    };
    let m = lemma::grid_oracle(&inst, grid).map_err(to_py)?;
    Ok((m.value, m.b.into_inner()))
}

/// Runs a `key = value` config; returns `(csv, summary, violations)`.
#[pyfunction]
fn run_config(py: Python<'_>, text: &str) -> PyResult<(String, String, usize)> {
    let cfg = ExperimentConfig::parse(text).map_err(to_py)?;
    let out = py.detach(|| core_run_config(&cfg, None)).map_err(to_py)?;
    Ok((out.csv, out.summary, out.violations))
}

#[pymodule]
fn vrrw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWeight>()?;
    m.add_class::<PyWalk>()?;
    m.add_class::<PyRecord>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(a_coeff, m)?)?;
    m.add_function(wrap_pyfunction!(big_a, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_sum, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(grid_minimum, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
