use discovery::diversifier::{celf_select as celf, greedy_select as greedy, objective as obj, SelectionState};
use discovery::engine::{Engine as CoreEngine, EngineError, StreamRequest};
use discovery::events::EventEnvelope;
use discovery::pipeline::RankingConfig;
use discovery::stats::welch_t_test as welch;
use discovery::weights::{diffuse as diffuse_core, global_weights as global, CategoryStats, CoInterestMatrix, SmoothingPriors};
use discovery::{CategoryWeights, ClickModel as CoreModel, Outcome, ScoredItem};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn engine_err(e: EngineError) -> PyErr {
    match e {
        EngineError::InvalidRequest(_) | EngineError::InvalidEvent { .. } => value_err(e),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Bayesian probit click model over `attribute=value` weight keys.
#[pyclass(module = "discovery_py")]
struct ClickModel {
    inner: CoreModel,
}

#[pymethods]
impl ClickModel {
    #[new]
    #[pyo3(signature = (prior_mean = 0.0, prior_variance = 1.0, beta = 1.0))]
    fn new(prior_mean: f64, prior_variance: f64, beta: f64) -> PyResult<Self> {
        CoreModel::new(prior_mean, prior_variance, beta)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn update(&mut self, keys: Vec<String>, clicked: bool) {
        let outcome = if clicked { Outcome::Clicked } else { Outcome::NotClicked };
        self.inner.update_keys(&keys, outcome);
    }

    fn predict(&self, keys: Vec<String>) -> f64 {
        self.inner.predict_keys(&keys)
    }

    /// `(mean, variance)` of one weight; the prior for unseen keys.
    fn weight(&self, key: &str) -> (f64, f64) {
        let w = self.inner.weight(key);
        (w.mean, w.variance)
    }

    #[getter]
    fn observations(&self) -> u64 {
        self.inner.observations()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    fn keys(&self) -> Vec<String> {
        self.inner.weights().keys().cloned().collect()
    }

    fn snapshot<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.snapshot())
    }

    #[staticmethod]
    fn restore(data: &[u8]) -> PyResult<Self> {
        CoreModel::restore(data).map(|inner| Self { inner }).map_err(value_err)
    }
}

fn scored(items: Vec<(String, usize, f64)>) -> Vec<ScoredItem> {
    items.into_iter().map(|(id, c, s)| ScoredItem::new(id, c, s)).collect()
}

fn ids(state: SelectionState) -> Vec<String> {
    state.chosen.into_iter().map(|c| c.item_id.to_string()).collect()
}

/// Lazy greedy selection of `k` items from `(item_id, category, score)` tuples.
#[pyfunction]
fn celf_select(items: Vec<(String, usize, f64)>, weights: Vec<f64>, k: usize) -> PyResult<Vec<String>> {
    let w = CategoryWeights::new(weights).map_err(value_err)?;
    celf(&scored(items), &w, k).map(ids).map_err(value_err)
}

#[pyfunction]
fn greedy_select(items: Vec<(String, usize, f64)>, weights: Vec<f64>, k: usize) -> PyResult<Vec<String>> {
    let w = CategoryWeights::new(weights).map_err(value_err)?;
    greedy(&scored(items), &w, k).map(ids).map_err(value_err)
}

#[pyfunction]
fn objective(items: Vec<(String, usize, f64)>, weights: Vec<f64>) -> PyResult<f64> {
    let w = CategoryWeights::new(weights).map_err(value_err)?;
    if let Some(it) = items.iter().find(|it| it.1 >= w.d()) {
        return Err(value_err(format!("category {} out of range for d={}", it.1, w.d())));
    }
    Ok(obj(&scored(items), &w))
}

/// Smoothed per-category CTR `(c + alpha) / (v + alpha + beta)`.
#[pyfunction]
#[pyo3(signature = (clicks, views, alpha = 1.0, beta = 9.0))]
fn global_weights(clicks: Vec<u64>, views: Vec<u64>, alpha: f64, beta: f64) -> PyResult<Vec<f64>> {
    if clicks.len() != views.len() {
        return Err(value_err("clicks and views differ in length"));
    }
    let priors = SmoothingPriors::new(alpha, beta).map_err(value_err)?;
    Ok(global(&CategoryStats { clicks, views }, priors).into_inner())
}

/// `M w` normalized to sum 1.
#[pyfunction]
fn diffuse(matrix: Vec<Vec<f64>>, weights: Vec<f64>) -> PyResult<Vec<f64>> {
    let m = CoInterestMatrix::from_rows(matrix).map_err(value_err)?;
    let w = CategoryWeights::new(weights).map_err(value_err)?;
    diffuse_core(&m, &w).map(CategoryWeights::into_inner).map_err(value_err)
}

/// Two-sided Welch t-test; returns `(t, df, p)`.
#[pyfunction]
fn welch_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let r = welch(&a, &b).map_err(value_err)?;
    Ok((r.t, r.df, r.p))
}

#[pyfunction]
fn norm_cdf(x: f64) -> f64 {
    discovery::norm_cdf(x)
}

/// Ranking engine over a data directory.
#[pyclass(module = "discovery_py", unsendable)]
struct Engine {
    inner: CoreEngine,
}

#[pymethods]
impl Engine {
    #[staticmethod]
    fn open(data_dir: std::path::PathBuf) -> PyResult<Self> {
        CoreEngine::open(data_dir, RankingConfig::default())
            .map(|inner| Self { inner })
            .map_err(engine_err)
    }

    #[getter]
    fn generation(&self) -> u64 {
        self.inner.published().generation()
    }

    #[getter]
    fn pending_events(&self) -> usize {
        self.inner.pending_events()
    }

    /// One stream page as `(rank, item_id, category, score)` tuples.
    #[pyo3(signature = (user_id = None, session = None, page = 0, size = 60))]
    fn page(
        &self,
        user_id: Option<String>,
        session: Option<String>,
        page: usize,
        size: usize,
    ) -> PyResult<Vec<(usize, String, usize, f64)>> {
        let req = StreamRequest {
            user_id,
            session,
            page,
            size,
        };
        let page = self.inner.page(&req).map_err(engine_err)?;
        Ok(page.items.into_iter().map(|c| (c.rank, c.item_id, c.category, c.score)).collect())
    }

    /// Appends events given as a JSON array of envelopes; returns
    /// `(accepted, duplicates, unknown_items)`.
    fn ingest(&mut self, events_json: &str) -> PyResult<(usize, usize, usize)> {
        let envelopes: Vec<EventEnvelope> = serde_json::from_str(events_json).map_err(value_err)?;
        let ack = self.inner.ingest(envelopes).map_err(engine_err)?;
        Ok((ack.accepted, ack.duplicates, ack.unknown_items))
    }

    /// Rebuilds the model and weights; returns the new generation.
    fn refresh(&mut self) -> PyResult<u64> {
        self.inner.refresh().map(|r| r.generation).map_err(engine_err)
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.published().global_weights().as_slice().to_vec()
    }

    fn user_weights(&self, user_id: &str) -> PyResult<(bool, Vec<f64>)> {
        let u = self.inner.user_weights(user_id).map_err(engine_err)?;
        Ok((u.personalized, u.weights))
    }
}

#[pymodule]
fn discovery_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ClickModel>()?;
    m.add_class::<Engine>()?;
    m.add_function(wrap_pyfunction!(celf_select, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_select, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(global_weights, m)?)?;
    m.add_function(wrap_pyfunction!(diffuse, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(norm_cdf, m)?)?;
    Ok(())
}
