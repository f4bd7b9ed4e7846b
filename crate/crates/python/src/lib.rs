//! Python bindings for `dogates_core`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dogates_core::{self as core, Error, ForestParams, GatesMode, Matrix, RunConfig, ScenarioConfig, ScenarioId};

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Observed data: outcome `y`, binary treatment `d`, covariate rows `x`.
#[pyclass(name = "Dataset", module = "dogates", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: core::Dataset,
    tau_true: Option<Vec<f64>>,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (y, d, x, feature_names = None))]
    fn new(y: Vec<f64>, d: Vec<u8>, x: Vec<Vec<f64>>, feature_names: Option<Vec<String>>) -> PyResult<Self> {
        let x = if x.is_empty() {
            Matrix::zeros(0, 0)
        } else {
            Matrix::from_rows(&x).map_err(to_py)?
        };
        let inner = core::Dataset::new(y, d, x, feature_names).map_err(to_py)?;
        Ok(Self { inner, tau_true: None })
    }

    /// Reads a CSV with columns `y`, `d`, `x1..xp` and optionally `tau_true`.
    #[staticmethod]
    fn from_csv(path: &str) -> PyResult<Self> {
        let loaded = core::Dataset::read_csv(path).map_err(to_py)?;
        Ok(Self {
            inner: loaded.data,
            tau_true: loaded.tau_true,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, p={}, treated={})",
            self.inner.len(),
            self.inner.n_features(),
            self.inner.n_treated()
        )
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y().to_vec()
    }

    #[getter]
    fn d(&self) -> Vec<u8> {
        self.inner.d().to_vec()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn tau_true(&self) -> Option<Vec<f64>> {
        self.tau_true.clone()
    }

    /// Invariant violations for a run with `k` groups; empty when valid.
    #[pyo3(signature = (k = 5))]
    fn validate(&self, k: usize) -> Vec<String> {
        core::validate_dataset(&self.inner, k).into_iter().map(|v| v.0).collect()
    }
}

/// Aggregated group effects and the bagged CATE from one run.
#[pyclass(name = "GatesResult", module = "dogates", frozen)]
struct PyGatesResult {
    gates: core::GatesResult,
    cate: core::CateEnsemble,
}

#[pymethods]
impl PyGatesResult {
    #[getter]
    fn mode(&self) -> String {
        self.gates.mode.to_string()
    }

    #[getter]
    fn k(&self) -> usize {
        self.gates.k
    }

    #[getter]
    fn gamma(&self) -> Vec<f64> {
        self.gates.gamma_median.clone()
    }

    #[getter]
    fn ci_low(&self) -> Vec<f64> {
        self.gates.ci_median_low.clone()
    }

    #[getter]
    fn ci_high(&self) -> Vec<f64> {
        self.gates.ci_median_high.clone()
    }

    #[getter]
    fn p_adjusted(&self) -> Vec<f64> {
        self.gates.p_adjusted.clone()
    }

    #[getter]
    fn gamma_per_split(&self) -> Vec<Vec<f64>> {
        self.gates.gamma_per_split.clone()
    }

    #[getter]
    fn failed_splits(&self) -> usize {
        self.gates.failures.len()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.gates.warnings.clone()
    }

    /// Per-observation median of the out-of-sample CATE proxy, `None` where
    /// the observation never landed in a main half.
    #[getter]
    fn cate(&self) -> Vec<Option<f64>> {
        self.cate.s_bar.clone()
    }

    #[getter]
    fn estimate_counts(&self) -> Vec<usize> {
        self.cate.counts()
    }

    /// Group means of the bagged CATE within its own quantile groups.
    #[pyo3(signature = (k = None))]
    fn cate_benchmark(&self, k: Option<usize>) -> PyResult<Vec<f64>> {
        core::pipeline::benchmark_or_constant(&self.cate, k.unwrap_or(self.gates.k)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("GatesResult(mode={}, gamma={:?})", self.gates.mode, self.gates.gamma_median)
    }
}

/// Runs DO GATES over `b` random splits.
#[pyfunction]
#[pyo3(signature = (
    data, k = 5, b = 100, mode = "observational", seed = 0, trees = 200, min_leaf = 5,
    mtry = None, trim_lo = 0.02, trim_hi = 0.95, alpha = 0.05
))]
#[allow(clippy::too_many_arguments)]
fn run_dogates(
    py: Python<'_>,
    data: PyRef<'_, PyDataset>,
    k: usize,
    b: usize,
    mode: &str,
    seed: u64,
    trees: usize,
    min_leaf: usize,
    mtry: Option<usize>,
    trim_lo: f64,
    trim_hi: f64,
    alpha: f64,
) -> PyResult<PyGatesResult> {
    let config = RunConfig {
        k,
        b,
        mode: mode.parse::<GatesMode>().map_err(to_py)?,
        forest: ForestParams {
            n_trees: trees,
            min_leaf,
            mtry,
            ..ForestParams::default()
        },
        trim_lo,
        trim_hi,
        alpha,
        seed,
        ..RunConfig::default()
    };
    let dataset = data.inner.clone();
    let out = py.detach(move || core::run_dogates(&dataset, &config)).map_err(to_py)?;
    Ok(PyGatesResult {
        gates: out.gates,
        cate: out.cate,
    })
}

/// Draws one dataset from a simulation scenario (`"A"` to `"L"`).
#[pyfunction]
#[pyo3(signature = (scenario, n = 2000, seed = 0, covariate_seed = None))]
fn simulate(scenario: &str, n: usize, seed: u64, covariate_seed: Option<u64>) -> PyResult<PyDataset> {
    let id: ScenarioId = scenario.parse().map_err(to_py)?;
    let mut config = ScenarioConfig::new(id, n, seed);
    if let Some(s) = covariate_seed {
        config = config.with_covariate_seed(s);
    }
    let sim = core::gen_scenario(&config).map_err(to_py)?;
    Ok(PyDataset {
        inner: sim.base,
        tau_true: Some(sim.tau_true),
    })
}

/// 0-based quantile group labels of `scores`.
#[pyfunction]
fn assign_groups(scores: Vec<f64>, k: usize) -> PyResult<Vec<usize>> {
    Ok(core::assign_groups(&scores, k).map_err(to_py)?.labels)
}

#[pyfunction]
fn true_group_effects(tau: Vec<f64>, k: usize) -> PyResult<Vec<f64>> {
    core::true_group_effects(&tau, k).map_err(to_py)
}

#[pymodule]
fn dogates(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyGatesResult>()?;
    m.add_function(wrap_pyfunction!(run_dogates, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(assign_groups, m)?)?;
    m.add_function(wrap_pyfunction!(true_group_effects, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
