//! Python bindings. Input and configuration errors raise `ValueError`,
//! numerical failures `RuntimeError`, file errors `OSError`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use botshare::eval::{self, ExperimentOptions, Metric, PredictionSet, TestMode};
use botshare::features::{assemble_matrix, FeatureSet};
use botshare::ingest::{self, View};
use botshare::regress::{self, Algorithm, ModelSpec, TrainedModel};
use botshare::report::Format;
use botshare::synth::{self, SynthConfig, SynthPaths};
use botshare::Error;

fn py_err(e: Error) -> PyErr {
    match (&e, e.exit_code()) {
        (Error::Io { .. }, _) => PyOSError::new_err(e.to_string()),
        (_, 3) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

/// `(ids, rows, targets)`.
type MatrixParts = (Vec<String>, Vec<Vec<f64>>, Vec<f64>);

fn spec(algorithm: &str, params: Option<BTreeMap<String, f64>>, seed: Option<u64>) -> PyResult<ModelSpec> {
    let mut s = ModelSpec::parse(algorithm).map_err(py_err)?;
    for (k, v) in params.unwrap_or_default() {
        s = s.with_param(&k, v).map_err(py_err)?;
    }
    Ok(match seed {
        Some(seed) => s.with_seed(seed),
        None => s,
    })
}

/// Joined ground truth, profiles and optional scores under one view.
#[pyclass(name = "Dataset", module = "botshare", frozen)]
struct PyDataset {
    inner: ingest::Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (ground_truth, profiles, botometer=None, snapshot_time=None, view="all"))]
    fn load(
        ground_truth: PathBuf,
        profiles: PathBuf,
        botometer: Option<PathBuf>,
        snapshot_time: Option<&str>,
        view: &str,
    ) -> PyResult<Self> {
        let snapshot = match snapshot_time {
            Some(s) => s
                .parse()
                .map_err(|e| PyValueError::new_err(format!("snapshot_time: {e}")))?,
            None => synth::default_snapshot(),
        };
        let view: View = parse(view)?;
        let d = ingest::load_joined(&ground_truth, &profiles, botometer.as_deref(), snapshot)
            .and_then(|d| d.with_view(view))
            .map_err(py_err)?;
        Ok(PyDataset { inner: d })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn view(&self) -> &'static str {
        self.inner.view().label()
    }

    /// Design matrix of one feature set.
    fn features(&self, feature_set: &str) -> PyResult<MatrixParts> {
        let m = assemble_matrix(&self.inner, parse(feature_set)?).map_err(py_err)?;
        Ok((m.ids().to_vec(), m.rows().to_vec(), m.targets().to_vec()))
    }

    fn __repr__(&self) -> String {
        format!("Dataset(view={:?}, rows={})", self.inner.view().label(), self.inner.len())
    }
}

/// A fitted regressor bound to one feature set.
#[pyclass(name = "Model", module = "botshare", frozen)]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (dataset, algorithm, feature_set, params=None, seed=None))]
    fn train(
        py: Python<'_>,
        dataset: &PyDataset,
        algorithm: &str,
        feature_set: &str,
        params: Option<BTreeMap<String, f64>>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        let s = spec(algorithm, params, seed)?;
        let set: FeatureSet = parse(feature_set)?;
        let d = &dataset.inner;
        let inner = py
            .detach(|| assemble_matrix(d, set).and_then(|m| regress::fit(&s, &m)))
            .map_err(py_err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: TrainedModel::load(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.spec().algorithm().name()
    }

    #[getter]
    fn feature_set(&self) -> &'static str {
        self.inner.feature_set().label()
    }

    /// Raw predictions, unclamped, one per row.
    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let dim = self.inner.feature_set().dimension();
        rows.iter()
            .map(|r| {
                if r.len() == dim {
                    Ok(self.inner.predict_row(r))
                } else {
                    Err(PyValueError::new_err(format!("expected {dim} features, got {}", r.len())))
                }
            })
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_json(&mut buf).map_err(py_err)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("Model({}, {})", self.algorithm(), self.feature_set())
    }
}

/// Results of a cross-validated comparison grid.
#[pyclass(name = "Experiment", module = "botshare", frozen)]
struct PyExperiment {
    inner: eval::ExperimentResult,
}

#[pymethods]
impl PyExperiment {
    /// Rendered comparison table, `markdown` or `csv`.
    #[pyo3(signature = (metric="mae", format="markdown"))]
    fn table(&self, metric: &str, format: &str) -> PyResult<String> {
        let metric: Metric = parse(metric)?;
        let format: Format = parse(format)?;
        Ok(self.inner.table(metric).map_err(py_err)?.render(format))
    }

    /// Aggregate score and star for one cell.
    #[pyo3(signature = (algorithm, feature_set, metric="mae"))]
    fn cell(&self, algorithm: &str, feature_set: &str, metric: &str) -> PyResult<(f64, bool)> {
        let a: Algorithm = parse(algorithm)?;
        let s: FeatureSet = parse(feature_set)?;
        let m: Metric = parse(metric)?;
        let c = self
            .inner
            .cell(a, s)
            .ok_or_else(|| PyValueError::new_err(format!("no cell for {a} on {s}")))?;
        Ok((c.result.aggregate(m), c.test(m).significant_better))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (dataset, algorithms=None, feature_sets=None, k=10, repeats=10, seed=1, alpha=0.05, params=None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    dataset: &PyDataset,
    algorithms: Option<Vec<String>>,
    feature_sets: Option<Vec<String>>,
    k: usize,
    repeats: usize,
    seed: u64,
    alpha: f64,
    params: Option<BTreeMap<String, BTreeMap<String, f64>>>,
) -> PyResult<PyExperiment> {
    let mut params = params.unwrap_or_default();
    let specs = match algorithms {
        Some(names) => names
            .iter()
            .map(|n| spec(n, params.remove(n.as_str()), None))
            .collect::<PyResult<Vec<_>>>()?,
        None => Algorithm::ALL
            .into_iter()
            .map(|a| spec(a.name(), params.remove(a.name()), None))
            .collect::<PyResult<Vec<_>>>()?,
    };
    if let Some(unused) = params.keys().next() {
        return Err(PyValueError::new_err(format!("params given for unselected algorithm {unused:?}")));
    }
    let sets = match feature_sets {
        Some(v) => v.iter().map(|s| parse(s)).collect::<PyResult<Vec<FeatureSet>>>()?,
        None => FeatureSet::ALL.to_vec(),
    };
    let options = ExperimentOptions {
        k,
        repeats,
        seed,
        alpha,
        mode: TestMode::Corrected,
    };
    let d = &dataset.inner;
    let inner = py
        .detach(|| eval::run_experiment(d, &sets, &specs, &options))
        .map_err(py_err)?;
    Ok(PyExperiment { inner })
}

#[pyfunction]
fn mae(real: Vec<f64>, pred: Vec<f64>) -> PyResult<f64> {
    Ok(PredictionSet::new(real, pred).map_err(py_err)?.mae())
}

#[pyfunction]
fn rmse(real: Vec<f64>, pred: Vec<f64>) -> PyResult<f64> {
    Ok(PredictionSet::new(real, pred).map_err(py_err)?.rmse())
}

/// Corrected resampled paired t-test over `baseline - candidate`
/// differences.
#[pyfunction]
#[pyo3(signature = (differences, n_train, n_test, alpha=0.05, corrected=true))]
fn paired_ttest<'py>(
    py: Python<'py>,
    differences: Vec<f64>,
    n_train: usize,
    n_test: usize,
    alpha: f64,
    corrected: bool,
) -> PyResult<Bound<'py, PyDict>> {
    if differences.len() < 2 || n_train == 0 {
        return Err(PyValueError::new_err("need at least two differences and n_train > 0"));
    }
    let mode = if corrected { TestMode::Corrected } else { TestMode::Naive };
    let t = eval::paired_ttest(&differences, n_train, n_test, alpha, mode);
    let out = PyDict::new(py);
    out.set_item("t", t.t_statistic)?;
    out.set_item("p", t.p_value)?;
    out.set_item("df", t.degrees_of_freedom)?;
    out.set_item("mean_difference", t.mean_difference)?;
    out.set_item("significant_better", t.significant_better)?;
    out.set_item("degenerate", t.degenerate)?;
    Ok(out)
}

/// Writes a synthetic dataset and returns the three file paths.
#[pyfunction]
#[pyo3(signature = (out_dir, n_accounts=2838, noise_std=4.0, credulous_fraction=None, seed=1))]
fn generate_synthetic<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    n_accounts: usize,
    noise_std: f64,
    credulous_fraction: Option<f64>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        n_accounts,
        noise_std,
        credulous_fraction: credulous_fraction.unwrap_or(defaults.credulous_fraction),
        seed,
        ..defaults
    };
    let data = synth::generate(&cfg).map_err(py_err)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| PyOSError::new_err(e.to_string()))?;
    let paths = SynthPaths::in_dir(&out_dir);
    data.write(&paths).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("ground_truth", paths.ground_truth)?;
    out.set_item("profiles", paths.profiles)?;
    out.set_item("botometer", paths.botometer)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "botshare")]
fn botshare_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(paired_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add("ALGORITHMS", Algorithm::ALL.map(|a| a.name()).to_vec())?;
    m.add("FEATURE_SETS", FeatureSet::ALL.map(|s| s.label()).to_vec())?;
    Ok(())
}
