//! Python bindings for the blendids library.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use blendids::app::{self, ModelBundle, RunConfig};
use blendids::blend::{ForestConfig, ForestModel};
use blendids::classifiers::{fit_naive_bayes, fit_svm, fit_tree, BaseModel, Classifier};
use blendids::dataset::{self, load_csv, FeatureSchema, SplitRatio};
use blendids::eval::{confusion, EvaluationReport};
use blendids::net::{train_net_xy, AdamConfig, NetModel, Optimizer, OutputMode, TrainSpec};
use blendids::synth::{two_gaussians, SynthSpec};
use blendids::{Error, ErrorKind, Matrix};

fn to_py(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Training => PyRuntimeError::new_err(e.to_string()),
        ErrorKind::Config | ErrorKind::Data => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for blendids::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn matrix(rows: &[Vec<f64>], width: usize) -> PyResult<Matrix> {
    Matrix::from_rows(rows, width).py()
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

/// A labelled feature matrix with its schema.
#[pyclass(name = "Dataset", module = "pyblendids", frozen)]
struct PyDataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> PyResult<Self> {
        let width = features.first().map_or(0, Vec::len);
        let inner =
            dataset::Dataset::from_parts(matrix(&features, width)?, labels, n_classes).py()?;
        Ok(PyDataset { inner })
    }

    /// Two-Gaussian synthetic data.
    #[staticmethod]
    #[pyo3(signature = (n=2000, features=6, mean=2.0, std=1.0, attack_fraction=0.5, label_noise=0.0, seed=0))]
    fn synthetic(
        n: usize,
        features: usize,
        mean: f64,
        std: f64,
        attack_fraction: f64,
        label_noise: f64,
        seed: u64,
    ) -> Self {
        let spec = SynthSpec {
            n,
            features,
            mean,
            std,
            attack_fraction,
            label_noise,
        };
        PyDataset {
            inner: two_gaussians(&spec, seed),
        }
    }

    /// Reads a CSV under a built-in schema name or schema TOML path.
    #[staticmethod]
    fn load_csv(path: &str, schema: &str) -> PyResult<Self> {
        let schema = FeatureSchema::resolve(schema).py()?;
        Ok(PyDataset {
            inner: load_csv(path, &schema).py()?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.feature_count()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.inner.n_classes()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.features())
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.schema().feature_names()
    }

    fn class_counts(&self) -> Vec<usize> {
        self.inner.class_counts()
    }

    fn subset(&self, indices: Vec<usize>) -> PyResult<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.inner.len()) {
            return Err(PyValueError::new_err(format!(
                "row index {bad} out of range"
            )));
        }
        Ok(PyDataset {
            inner: self.inner.subset(&indices),
        })
    }

    /// Drops rows with missing values and exact duplicates.
    fn clean(&self) -> Self {
        PyDataset {
            inner: dataset::clean(&self.inner),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, features={}, classes={})",
            self.inner.len(),
            self.inner.feature_count(),
            self.inner.n_classes()
        )
    }
}

/// Seeded train/test split; `ratio` like "80:20". Returns index lists.
#[pyfunction]
#[pyo3(signature = (data, ratio="80:20", seed=0, stratified=true))]
fn split(
    data: &PyDataset,
    ratio: &str,
    seed: u64,
    stratified: bool,
) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let ratio: SplitRatio = ratio.parse().py()?;
    let plan = dataset::split(&data.inner, ratio, seed, stratified).py()?;
    Ok((plan.train_indices, plan.test_indices))
}

/// K disjoint folds covering every row.
#[pyfunction]
#[pyo3(signature = (data, k=5, seed=0, stratified=true))]
fn kfold(data: &PyDataset, k: usize, seed: u64, stratified: bool) -> PyResult<Vec<Vec<usize>>> {
    let plan = if stratified {
        dataset::stratified_kfold(&data.inner, k, seed)
    } else {
        dataset::kfold(&data.inner, k, seed)
    }
    .py()?;
    Ok(plan.folds)
}

/// One fitted first-level classifier (SVM, NB or DT).
#[pyclass(name = "BaseModel", module = "pyblendids", frozen)]
struct PyBaseModel {
    inner: BaseModel,
}

#[pymethods]
impl PyBaseModel {
    #[staticmethod]
    #[pyo3(signature = (data, lam=1e-4, epochs=20, seed=0))]
    fn fit_svm(data: &PyDataset, lam: f64, epochs: usize, seed: u64) -> PyResult<Self> {
        Ok(PyBaseModel {
            inner: fit_svm(&data.inner, lam, epochs, seed).py()?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (data, variance_floor=1e-9))]
    fn fit_naive_bayes(data: &PyDataset, variance_floor: f64) -> PyResult<Self> {
        Ok(PyBaseModel {
            inner: fit_naive_bayes(&data.inner, variance_floor).py()?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (data, max_depth=Some(12), min_samples_leaf=2))]
    fn fit_tree(
        data: &PyDataset,
        max_depth: Option<usize>,
        min_samples_leaf: usize,
    ) -> PyResult<Self> {
        Ok(PyBaseModel {
            inner: fit_tree(&data.inner, max_depth, min_samples_leaf).py()?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        self.inner
            .predict(&matrix(&rows, self.inner.feature_count())?)
            .py()
    }

    fn predict_scores(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .predict_scores(&matrix(&rows, self.inner.feature_count())?)
            .py()
    }
}

/// Bagged CART forest with majority vote.
#[pyclass(name = "Forest", module = "pyblendids", frozen)]
struct PyForest {
    inner: ForestModel,
}

#[pymethods]
impl PyForest {
    #[staticmethod]
    #[pyo3(signature = (data, trees=100, features_per_split=None, max_depth=Some(12), min_samples_leaf=1, seed=0))]
    fn fit(
        data: &PyDataset,
        trees: usize,
        features_per_split: Option<usize>,
        max_depth: Option<usize>,
        min_samples_leaf: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = ForestConfig {
            trees,
            features_per_split,
            max_depth,
            min_samples_leaf,
            bootstrap: true,
        };
        let d = &data.inner;
        Ok(PyForest {
            inner: ForestModel::fit(d.features(), d.labels(), d.n_classes(), &cfg, seed).py()?,
        })
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.inner.trees.len()
    }

    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        self.inner
            .predict(&matrix(&rows, self.inner.feature_count)?)
            .py()
    }

    fn votes(&self, row: Vec<f64>) -> PyResult<Vec<usize>> {
        self.inner.votes(&row).py()
    }
}

/// Feed-forward network with sigmoid hidden units.
#[pyclass(name = "Net", module = "pyblendids", frozen)]
struct PyNet {
    inner: NetModel,
}

#[pymethods]
impl PyNet {
    /// `output` is "softmax" (cross-entropy) or "sigmoid_squared" (sigmoid with
    /// squared error); `optimizer` is "adam" or "sgd".
    #[staticmethod]
    #[pyo3(signature = (data, hidden=vec![16], epochs=200, batch_size=32, learning_rate=0.001, optimizer="adam", output="softmax", seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        data: &PyDataset,
        hidden: Vec<usize>,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        optimizer: &str,
        output: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let optimizer = match optimizer {
            "adam" => Optimizer::Adam(AdamConfig {
                learning_rate,
                ..AdamConfig::default()
            }),
            "sgd" => Optimizer::Sgd { learning_rate },
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown optimizer {other:?}"
                )))
            }
        };
        let output = match output {
            "softmax" => OutputMode::Softmax,
            "sigmoid_squared" => OutputMode::SigmoidSquared,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown output mode {other:?}"
                )))
            }
        };
        let spec = TrainSpec {
            epochs,
            batch_size,
            seed,
            optimizer,
            output,
            ..TrainSpec::default()
        };
        let d = &data.inner;
        let mut layers = vec![d.feature_count()];
        layers.extend(hidden);
        layers.push(d.n_classes());
        let inner = train_net_xy(d.features(), d.labels(), d.n_classes(), &spec, &layers).py()?;
        Ok(PyNet { inner })
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.inner.sizes()
    }

    #[getter]
    fn final_loss(&self) -> f64 {
        self.inner.final_loss
    }

    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        self.inner
            .predict(&matrix(&rows, self.inner.input_size())?)
            .py()
    }

    fn predict_proba(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .predict_proba(&matrix(&rows, self.inner.input_size())?)
            .py()
    }
}

fn report_dict<'py>(py: Python<'py>, r: &EvaluationReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("model", &r.model)?;
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("precision", r.precision)?;
    d.set_item("recall", r.recall)?;
    d.set_item("f1", r.f1)?;
    d.set_item("averaging", &r.averaging)?;
    d.set_item("confusion", r.confusion.counts.clone())?;
    Ok(d)
}

/// Accuracy, precision, recall, F1 and the confusion counts.
#[pyfunction]
fn metrics<'py>(
    py: Python<'py>,
    truth: Vec<usize>,
    predicted: Vec<usize>,
    n_classes: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cm = confusion(&truth, &predicted, n_classes).py()?;
    report_dict(py, &EvaluationReport::new("model", "data", "", cm).py()?)
}

/// A trained two-level model plus what it needs to replay predictions.
#[pyclass(name = "Bundle", module = "pyblendids", frozen)]
struct PyBundle {
    inner: ModelBundle,
}

#[pymethods]
impl PyBundle {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyBundle {
            inner: ModelBundle::load(path).py()?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).py()
    }

    #[getter]
    fn digest(&self) -> String {
        self.inner.digest.clone()
    }

    #[getter]
    fn chosen(&self) -> &'static str {
        self.inner.pipeline.chosen().name()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.schema.feature_names()
    }

    /// Final class ids for raw feature rows.
    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        let width = self.inner.schema.feature_count();
        self.inner.pipeline.predict(&matrix(&rows, width)?).py()
    }

    /// Per row: final class plus forest votes and network probabilities.
    fn predict_detail<'py>(
        &self,
        py: Python<'py>,
        rows: Vec<Vec<f64>>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let width = self.inner.schema.feature_count();
        let preds = self
            .inner
            .pipeline
            .predict_detail(&matrix(&rows, width)?)
            .py()?;
        preds
            .into_iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("class", p.class)?;
                d.set_item("forest_class", p.forest_class)?;
                d.set_item("forest_votes", p.forest_votes)?;
                d.set_item("ann_class", p.ann_class)?;
                d.set_item("ann_probs", p.ann_probs)?;
                Ok(d)
            })
            .collect()
    }

    /// Per-model reports on labelled rows.
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        data: &PyDataset,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let reports = app::evaluate_all(
            &self.inner.pipeline,
            &data.inner,
            &data.inner.schema().name,
            "python",
        )
        .py()?;
        reports.iter().map(|r| report_dict(py, r)).collect()
    }
}

/// Runs the full pipeline from a config file path or TOML text. Returns
/// the bundle and the held-out report as JSON text; writes the usual files
/// when `out` is given.
#[pyfunction]
#[pyo3(signature = (config=None, toml=None, seed=None, out=None))]
fn train(
    config: Option<&str>,
    toml: Option<&str>,
    seed: Option<u64>,
    out: Option<&str>,
) -> PyResult<(PyBundle, String)> {
    let mut cfg = match (config, toml) {
        (Some(path), None) => RunConfig::load(path).py()?,
        (None, Some(text)) => RunConfig::from_toml(text).py()?,
        (None, None) => RunConfig::default(),
        (Some(_), Some(_)) => {
            return Err(PyValueError::new_err(
                "pass either config or toml, not both",
            ))
        }
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let outcome = app::train(&cfg).py()?;
    if let Some(dir) = out {
        app::write_train_outputs(&outcome, std::path::Path::new(dir)).py()?;
    }
    let report = serde_json::to_string(&outcome.report)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((
        PyBundle {
            inner: outcome.bundle,
        },
        report,
    ))
}

#[pymodule]
fn pyblendids(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyBaseModel>()?;
    m.add_class::<PyForest>()?;
    m.add_class::<PyNet>()?;
    m.add_class::<PyBundle>()?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(kfold, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
