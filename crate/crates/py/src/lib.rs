//! Python bindings: configuration, single trials, sweeps, and the demand
//! primitives (sampler, linear response, price inversion).

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use p2ptv_sim::demand::{self, ElasticityMatrix};
use p2ptv_sim::harness;
use p2ptv_sim::{ExperimentConfig, SimError};

fn to_py_err(e: SimError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<ElasticityMatrix> {
    ElasticityMatrix::from_rows(&rows).map_err(to_py_err)
}

/// Experiment configuration; starts at the shipped defaults.
#[pyclass(name = "ExperimentConfig")]
struct PyExperimentConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyExperimentConfig {
    #[new]
    fn new() -> Self {
        Self { inner: ExperimentConfig::default() }
    }

    /// Applies one dotted-key assignment, e.g. `set("pricing.micro_step", "0.2")`.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner
            .set(key, value)
            .map_err(|e| PyKeyError::new_err(e.to_string()))
    }

    /// Loads a flat `key = value` config file over the defaults.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        ExperimentConfig::from_file(path.as_ref())
            .map(|inner| Self { inner })
            .map_err(to_py_err)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py_err)
    }

    /// The full configuration as a JSON string.
    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("config serializes")
    }

    fn __repr__(&self) -> String {
        format!("ExperimentConfig({})", self.to_json())
    }
}

/// Outcome of one paired trial.
#[pyclass(name = "TrialResult", frozen)]
struct PyTrialResult {
    #[pyo3(get)]
    p2ptv_profit: f64,
    #[pyo3(get)]
    unicast_profit: f64,
    #[pyo3(get)]
    incentives_paid: f64,
    /// None when the trial was flagged (zero-profit baseline).
    #[pyo3(get)]
    gain_pct: Option<f64>,
    #[pyo3(get)]
    rounds_used: u32,
    #[pyo3(get)]
    seed: u64,
}

#[pymethods]
impl PyTrialResult {
    fn __repr__(&self) -> String {
        format!(
            "TrialResult(seed={}, rounds={}, gain_pct={:?})",
            self.seed, self.rounds_used, self.gain_pct
        )
    }
}

/// Aggregate of one sweep cell.
#[pyclass(name = "SweepRow", frozen)]
struct PySweepRow {
    #[pyo3(get)]
    rounds: u32,
    #[pyo3(get)]
    mean_gain_pct: f64,
    #[pyo3(get)]
    stddev_gain_pct: f64,
    #[pyo3(get)]
    trials: u32,
    #[pyo3(get)]
    excluded: u32,
}

#[pymethods]
impl PySweepRow {
    fn __repr__(&self) -> String {
        format!(
            "SweepRow(rounds={}, mean_gain_pct={:.3}, stddev_gain_pct={:.3}, trials={}, excluded={})",
            self.rounds, self.mean_gain_pct, self.stddev_gain_pct, self.trials, self.excluded
        )
    }
}

/// Runs one paired trial (peer-assisted vs unicast) at the given seed.
#[pyfunction]
fn run_trial(config: &PyExperimentConfig, trial_seed: u64) -> PyResult<PyTrialResult> {
    let r = harness::run_trial(&config.inner, trial_seed).map_err(to_py_err)?;
    Ok(PyTrialResult {
        p2ptv_profit: r.p2ptv_profit,
        unicast_profit: r.unicast_profit,
        incentives_paid: r.incentives_paid,
        gain_pct: r.gain_pct,
        rounds_used: r.rounds_used,
        seed: r.seed,
    })
}

/// Sweeps the number of rounds, `trials` seeded trials per cell.
#[pyfunction]
fn sweep_rounds(
    config: &PyExperimentConfig,
    rounds_list: Vec<u32>,
    trials: u32,
) -> PyResult<Vec<PySweepRow>> {
    let outcome =
        harness::sweep_rounds(&config.inner, &rounds_list, trials).map_err(to_py_err)?;
    Ok(outcome
        .rows
        .into_iter()
        .map(|r| PySweepRow {
            rounds: r.rounds,
            mean_gain_pct: r.mean_gain_pct,
            stddev_gain_pct: r.stddev_gain_pct,
            trials: r.trials,
            excluded: r.excluded,
        })
        .collect())
}

/// Sequential bounded demand draws: 0 ≤ dᵢ ≤ d_max[i] and Σ dᵢ ≤ m.
#[pyfunction]
fn sample_demands(m: u32, d_max: Vec<f64>, seed: u64) -> Vec<f64> {
    demand::sample_demands(m, &d_max, seed)
}

/// Linear response `H·p` for an elasticity matrix given as nested rows,
/// optionally clamped per-program into [0, d_max[i]].
#[pyfunction]
#[pyo3(signature = (rows, prices, d_max=None))]
fn evaluate_demand(
    rows: Vec<Vec<f64>>,
    prices: Vec<f64>,
    d_max: Option<Vec<f64>>,
) -> PyResult<Vec<f64>> {
    let h = matrix_from_rows(rows)?;
    demand::evaluate_demand(&h, &prices, d_max.as_deref()).map_err(to_py_err)
}

/// Solves `H·p = d` for prices; rejects ill-conditioned systems.
#[pyfunction]
fn invert_prices(rows: Vec<Vec<f64>>, demand_vec: Vec<f64>) -> PyResult<Vec<f64>> {
    let h = matrix_from_rows(rows)?;
    demand::invert_prices(&h, &demand_vec).map_err(to_py_err)
}

#[pymodule]
fn p2ptv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExperimentConfig>()?;
    m.add_class::<PyTrialResult>()?;
    m.add_class::<PySweepRow>()?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_rounds, m)?)?;
    m.add_function(wrap_pyfunction!(sample_demands, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_demand, m)?)?;
    m.add_function(wrap_pyfunction!(invert_prices, m)?)?;
    Ok(())
}
