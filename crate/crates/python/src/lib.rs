//! Python bindings for `del_core`.
//!
//! Structured values cross the boundary as plain Python dicts and lists with
//! the same shape as the crate's JSON documents: a dialogue is
//! `{"id": str, "turns": [str, str, str], "label": str | None}`, model and
//! training options are the `model` and `train` sections of a run config.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use del_core::data::synthetic::{generate, SyntheticSpec};
use del_core::data::{build_vocab, split_shuffle, Dialogue, Label};
use del_core::ensemble::{majority_vote as core_majority_vote, vote_committee as core_vote_committee, PredictionSet};
use del_core::evaluation::{micro_f1 as core_micro_f1, pearson_agreement as core_pearson};
use del_core::hpo::{bo_loop, expected_improvement as core_ei, gp_fit, BoOptions, GpModel, SearchSpace, DEFAULT_XI};
use del_core::models::{Checkpoint, Classifier as CoreClassifier, ModelConfig};
use del_core::training::{train, TrainOptions};

create_exception!(delpy, DelError, PyException, "Raised for any error reported by the core library.");

fn err(e: del_core::Error) -> PyErr {
    DelError::new_err(format!("{}: {e}", e.kind()))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| DelError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| DelError::new_err(format!("config: {e}")))
}

fn from_py_or_default<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    match obj {
        Some(o) if !o.is_none() => from_py(o),
        _ => Ok(T::default()),
    }
}

fn labels(names: &[String]) -> PyResult<Vec<Label>> {
    names
        .iter()
        .map(|n| n.parse::<Label>().map_err(err))
        .collect()
}

fn label_names(labels: &[Label]) -> Vec<String> {
    labels.iter().map(|l| l.as_str().to_string()).collect()
}

/// Generates a labeled synthetic corpus as a list of dialogue dicts.
#[pyfunction]
#[pyo3(signature = (n, seed=0, prefix="s"))]
fn synthetic_corpus(py: Python<'_>, n: usize, seed: u64, prefix: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &generate(&SyntheticSpec::new(n, seed), prefix))
}

/// Micro-averaged precision, recall and F1 over happy, sad and angry.
#[pyfunction]
fn micro_f1(py: Python<'_>, gold: Vec<String>, pred: Vec<String>) -> PyResult<Py<PyAny>> {
    let report = core_micro_f1(&labels(&gold)?, &labels(&pred)?).map_err(err)?;
    to_py(py, &report)
}

/// Majority label of one example's votes; ties go to `others`.
#[pyfunction]
fn majority_vote(votes: Vec<String>) -> PyResult<String> {
    Ok(core_majority_vote(&labels(&votes)?).map_err(err)?.as_str().to_string())
}

/// Per-example majority vote across members' label lists.
#[pyfunction]
fn vote_committee(members: Vec<Vec<String>>) -> PyResult<Vec<String>> {
    let n = members.first().map_or(0, Vec::len);
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let sets = members
        .iter()
        .enumerate()
        .map(|(i, m)| PredictionSet::new(format!("m{i}"), ids.clone(), labels(m)?, None).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(label_names(&core_vote_committee(&sets).map_err(err)?.labels))
}

/// Pearson correlation of two label sequences' one-hot encodings.
#[pyfunction]
fn pearson_agreement(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    core_pearson(&labels(&a)?, &labels(&b)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (mu, sigma, f_best, xi=DEFAULT_XI))]
fn expected_improvement(mu: f64, sigma: f64, f_best: f64, xi: f64) -> PyResult<f64> {
    core_ei(mu, sigma, f_best, xi).map_err(err)
}

/// Bayesian optimisation of `objective(assignment) -> float` over `space`.
///
/// Returns `{"best": trial, "history": [trial, ...]}`. An objective that
/// raises or returns a non-finite value is recorded as a failed trial.
#[pyfunction]
#[pyo3(signature = (objective, space=None, options=None))]
fn bayes_opt(
    py: Python<'_>,
    objective: &Bound<'_, PyAny>,
    space: Option<&Bound<'_, PyAny>>,
    options: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let space: SearchSpace = match space {
        Some(s) if !s.is_none() => from_py(s)?,
        _ => SearchSpace::default_utrs(),
    };
    let opts: BoOptions = from_py_or_default(options)?;
    let result = bo_loop(
        |a| {
            let arg = to_py(py, a).map_err(|e| del_core::Error::InvalidArgument(e.to_string()))?;
            objective
                .call1((arg,))
                .and_then(|v| v.extract::<f64>())
                .map_err(|e| del_core::Error::InvalidArgument(e.to_string()))
        },
        &space,
        &opts,
    )
    .map_err(err)?;
    to_py(py, &result)
}

/// Gaussian process with an ARD squared-exponential kernel, fitted by
/// maximising the log marginal likelihood.
#[pyclass(module = "delpy")]
struct GaussianProcess {
    inner: GpModel,
}

#[pymethods]
impl GaussianProcess {
    #[new]
    #[pyo3(signature = (xs, ys, restarts=3, seed=0))]
    fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>, restarts: usize, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = gp_fit(&xs, &ys, restarts, &mut rng).map_err(err)?;
        Ok(GaussianProcess { inner })
    }

    /// Posterior mean and variance at `x`.
    fn posterior(&self, x: Vec<f64>) -> PyResult<(f64, f64)> {
        self.inner.posterior(&x).map_err(err)
    }

    #[getter]
    fn hyper(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.hyper)
    }
}

/// Flat or hierarchical dialogue classifier.
#[pyclass(module = "delpy")]
struct Classifier {
    inner: CoreClassifier,
}

#[pymethods]
impl Classifier {
    /// Builds an untrained model whose vocabulary comes from `dialogues`.
    #[new]
    #[pyo3(signature = (dialogues, config=None, min_count=1))]
    fn new(dialogues: &Bound<'_, PyAny>, config: Option<&Bound<'_, PyAny>>, min_count: usize) -> PyResult<Self> {
        let data: Vec<Dialogue> = from_py(dialogues)?;
        let config: ModelConfig = from_py_or_default(config)?;
        config.validate().map_err(err)?;
        let vocab = build_vocab(&data, min_count).map_err(err)?;
        let inner = CoreClassifier::new(config, vocab).map_err(err)?;
        Ok(Classifier { inner })
    }

    /// Trains in place with early stopping and returns the training report.
    ///
    /// Without `val`, a `val_fraction` share of `train_set` is held out.
    #[pyo3(signature = (train_set, val=None, options=None, val_fraction=0.1))]
    fn fit(
        &mut self,
        py: Python<'_>,
        train_set: &Bound<'_, PyAny>,
        val: Option<&Bound<'_, PyAny>>,
        options: Option<&Bound<'_, PyAny>>,
        val_fraction: f64,
    ) -> PyResult<Py<PyAny>> {
        let data: Vec<Dialogue> = from_py(train_set)?;
        let opts: TrainOptions = from_py_or_default(options)?;
        let (fit_set, val_set) = match val {
            Some(v) if !v.is_none() => (data, from_py(v)?),
            _ => split_shuffle(&data, opts.seed, val_fraction).map_err(err)?,
        };
        let model = self.inner.clone();
        let (model, report) = py
            .detach(|| train(model, &fit_set, &val_set, &opts))
            .map_err(err)?;
        self.inner = model;
        to_py(py, &report)
    }

    /// Label and class probabilities `[happy, sad, angry, others]`.
    fn predict(&self, dialogue: &Bound<'_, PyAny>) -> PyResult<(String, Vec<f64>)> {
        let d: Dialogue = from_py(dialogue)?;
        let (label, probs) = self.inner.predict(&self.inner.encode(&d)).map_err(err)?;
        Ok((label.as_str().to_string(), probs.to_vec()))
    }

    fn predict_labels(&self, dialogues: &Bound<'_, PyAny>) -> PyResult<Vec<String>> {
        let data: Vec<Dialogue> = from_py(dialogues)?;
        let out = data
            .iter()
            .map(|d| self.inner.predict(&self.inner.encode(d)).map(|p| p.0))
            .collect::<del_core::Result<Vec<_>>>()
            .map_err(err)?;
        Ok(label_names(&out))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.to_checkpoint().and_then(|c| c.save(path)).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let ckpt = Checkpoint::load(path).map_err(err)?;
        let inner = CoreClassifier::from_checkpoint(&ckpt).map_err(err)?;
        Ok(Classifier { inner })
    }

    #[getter]
    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.inner.config())
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.vocab().len()
    }
}

#[pymodule]
fn delpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DelError", m.py().get_type::<DelError>())?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(micro_f1, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(vote_committee, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(expected_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(bayes_opt, m)?)?;
    m.add_class::<GaussianProcess>()?;
    m.add_class::<Classifier>()?;
    Ok(())
}
