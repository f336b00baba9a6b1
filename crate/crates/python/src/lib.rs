//! Python bindings. Structured results cross the boundary as plain
//! dicts and lists built from the engine's JSON representation.

use std::path::PathBuf;

use metakb::evaluation::{evaluate_pipeline, Metric};
use metakb::hpo::{bayes_opt, genetic_search, grid_search, random_search, GaOptions, DEFAULT_GRID_CAP};
use metakb::kb::{build_kb, read_manifest, BuildOptions, BuildSpec, KnowledgeBase as Kb};
use metakb::metafeatures::extract_all;
use metakb::recommender::{
    loo_evaluate, recommend_knn, recommend_rf, train_rf_metamodel, KnnOptions, LooOptions, Method, RfOptions,
    DEFAULT_K, DEFAULT_META_TREES, DEFAULT_PROMISING_THRESHOLD,
};
use metakb::{hp_space, load_dataset, stratified_kfold, AlgorithmId, HpConfig};
use pyo3::exceptions::{PyFileNotFoundError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: metakb::Error) -> PyErr {
    match e {
        metakb::Error::FileNotFound(_) => PyFileNotFoundError::new_err(e.to_string()),
        e if e.is_data_error() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = metakb::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// A labelled tabular dataset loaded from CSV.
#[pyclass(module = "metakb", frozen)]
struct Dataset {
    inner: metakb::Dataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    #[pyo3(signature = (path, target = "class", id = None))]
    fn load(path: PathBuf, target: &str, id: Option<String>) -> PyResult<Self> {
        let id = id.unwrap_or_else(|| {
            path.file_stem()
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
        });
        let inner = load_dataset(&path, target).map_err(err)?.with_id(id);
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn c(&self) -> usize {
        self.inner.c()
    }

    #[getter]
    fn class_labels(&self) -> Vec<String> {
        self.inner.class_labels().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(id={:?}, n={}, p={}, c={})", self.inner.id(), self.inner.n(), self.inner.p(), self.inner.c())
    }
}

/// Name to value (None when undefined) for every catalogue entry.
#[pyfunction]
#[pyo3(signature = (dataset, seed = 0))]
fn extract_metafeatures<'py>(py: Python<'py>, dataset: &Dataset, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let mf = py.detach(|| extract_all(&dataset.inner, seed));
    to_py(py, &mf.to_flat_json())
}

/// A random point of an algorithm's hyperparameter space.
#[pyfunction]
#[pyo3(signature = (algorithm, seed = 0))]
fn sample_config<'py>(py: Python<'py>, algorithm: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let alg: AlgorithmId = parse(algorithm)?;
    let mut r = metakb::rng::rng(seed, metakb::rng::stream::SEARCH);
    to_py(py, &hp_space(alg).sample(&mut r))
}

/// Cross-validated scores of one configuration.
#[pyfunction]
#[pyo3(signature = (dataset, algorithm, params = None, folds = 5, repeats = 1, seed = 0))]
fn evaluate<'py>(
    py: Python<'py>,
    dataset: &Dataset,
    algorithm: &str,
    params: Option<&Bound<'py, PyAny>>,
    folds: usize,
    repeats: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let alg: AlgorithmId = parse(algorithm)?;
    let values = match params {
        Some(p) => {
            let text: String = py.import("json")?.call_method1("dumps", (p,))?.extract()?;
            serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("params: {e}")))?
        }
        None => metakb::ParamPoint::new(),
    };
    let cfg = HpConfig::new(alg, values, seed);
    let scores = py
        .detach(|| {
            let plan = stratified_kfold(&dataset.inner, folds, repeats, seed)?;
            evaluate_pipeline(&cfg, &dataset.inner, &plan)
        })
        .map_err(err)?;
    to_py(py, &scores)
}

/// Hyperparameter search; failing configurations score 0.
#[pyfunction]
#[pyo3(signature = (dataset, algorithm, strategy = "random", budget = 50, metric = "accuracy", folds = 5, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn tune<'py>(
    py: Python<'py>,
    dataset: &Dataset,
    algorithm: &str,
    strategy: &str,
    budget: usize,
    metric: &str,
    folds: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let alg: AlgorithmId = parse(algorithm)?;
    let metric: Metric = parse(metric)?;
    let ds = &dataset.inner;
    let result = py
        .detach(|| {
            let plan = stratified_kfold(ds, folds, 1, seed)?;
            let space = hp_space(alg);
            let objective = |p: &metakb::ParamPoint| {
                evaluate_pipeline(&HpConfig::new(alg, p.clone(), seed), ds, &plan).map_or(0.0, |s| s.mean(metric))
            };
            match strategy {
                "grid" => grid_search(&space, objective, 5, DEFAULT_GRID_CAP),
                "random" => random_search(&space, objective, budget, seed),
                "bayes" => bayes_opt(&space, objective, budget, seed),
                "ga" => {
                    let pop = budget.clamp(2, 10);
                    let opts = GaOptions {
                        pop_size: pop,
                        generations: (budget / pop).saturating_sub(1),
                        crossover_rate: 0.9,
                        mutation_rate: 0.2,
                    };
                    genetic_search(&space, objective, opts, seed)
                }
                other => Err(metakb::Error::InvalidConfig(format!("unknown strategy `{other}`"))),
            }
        })
        .map_err(err)?;
    to_py(py, &result)
}

/// A knowledge base of evaluated pipelines stored in a directory.
#[pyclass(module = "metakb", frozen)]
struct KnowledgeBase {
    inner: Kb,
}

#[pymethods]
impl KnowledgeBase {
    #[staticmethod]
    fn open(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Kb::open(path).map_err(err)?,
        })
    }

    /// Builds a new KB or resumes an interrupted one from a CSV manifest.
    #[staticmethod]
    #[pyo3(signature = (path, manifest, algorithms = None, configs = 50, metrics = None, folds = 5, repeats = 2, seed = 0, jobs = 0))]
    #[allow(clippy::too_many_arguments)]
    fn build(
        py: Python<'_>,
        path: PathBuf,
        manifest: PathBuf,
        algorithms: Option<Vec<String>>,
        configs: usize,
        metrics: Option<Vec<String>>,
        folds: usize,
        repeats: usize,
        seed: u64,
        jobs: usize,
    ) -> PyResult<Self> {
        let algorithms = match algorithms {
            Some(a) => a.iter().map(|s| parse(s)).collect::<PyResult<_>>()?,
            None => AlgorithmId::ALL.to_vec(),
        };
        let metrics = match metrics {
            Some(m) => m.iter().map(|s| parse(s)).collect::<PyResult<_>>()?,
            None => Metric::ALL.to_vec(),
        };
        let spec = BuildSpec {
            algorithms,
            configs_per_algo: configs,
            metrics,
            k: folds,
            repeats,
            seed,
        };
        let opts = BuildOptions {
            jobs,
            max_new_experiments: None,
        };
        let (inner, _) = py
            .detach(|| {
                let entries = read_manifest(&manifest)?;
                build_kb(&path, &entries, &spec, &opts)
            })
            .map_err(err)?;
        Ok(Self { inner })
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.stats())
    }

    fn dataset_ids(&self) -> Vec<String> {
        self.inner.datasets().iter().map(|d| d.dataset_id.clone()).collect()
    }

    fn metafeatures<'py>(&self, py: Python<'py>, dataset_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let d = self
            .inner
            .dataset(dataset_id)
            .ok_or_else(|| err(metakb::Error::UnknownDataset(dataset_id.into())))?;
        to_py(py, &d.metafeatures.to_flat_json())
    }

    #[pyo3(signature = (dataset_id, metric = "accuracy", top = 10))]
    fn query_best<'py>(&self, py: Python<'py>, dataset_id: &str, metric: &str, top: usize) -> PyResult<Bound<'py, PyAny>> {
        let best = self.inner.query_best(dataset_id, parse(metric)?, top).map_err(err)?;
        to_py(py, &best)
    }

    /// Ranked pipelines for a dataset, with neighbor provenance for kNN.
    #[pyo3(signature = (dataset, method = "knn", metric = "accuracy", k = DEFAULT_K, top = 10, exclude_self = false, trees = DEFAULT_META_TREES, seed = None))]
    #[allow(clippy::too_many_arguments)]
    fn recommend<'py>(
        &self,
        py: Python<'py>,
        dataset: &Dataset,
        method: &str,
        metric: &str,
        k: usize,
        top: usize,
        exclude_self: bool,
        trees: usize,
        seed: Option<u64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let method: Method = parse(method)?;
        let metric: Metric = parse(metric)?;
        let seed = seed.unwrap_or_else(|| self.inner.manifest().build.as_ref().map_or(0, |b| b.seed));
        let kb = &self.inner;
        let rec = py
            .detach(|| {
                let mf = extract_all(&dataset.inner, seed);
                let exclude = exclude_self.then(|| dataset.inner.id().to_string());
                match method {
                    Method::Knn => recommend_knn(kb, &mf, &KnnOptions {
                        metric,
                        k,
                        top_n: top,
                        exclude,
                    }),
                    Method::Rf => {
                        let opts = RfOptions {
                            metric,
                            trees,
                            promising_threshold: DEFAULT_PROMISING_THRESHOLD,
                            seed,
                        };
                        let model = train_rf_metamodel(kb, &opts, exclude.as_deref())?;
                        let candidates: Vec<HpConfig> = kb.pipelines().map(|p| p.config.clone()).collect();
                        recommend_rf(&model, &mf, &candidates, top)
                    }
                }
            })
            .map_err(err)?;
        to_py(py, &rec)
    }

    /// Leave-one-dataset-out evaluation; `trees = 0` skips the meta-model.
    #[pyo3(signature = (metric = "accuracy", k = DEFAULT_K, tolerance = 0.05, resamples = 20, trees = DEFAULT_META_TREES, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn loo_evaluate<'py>(
        &self,
        py: Python<'py>,
        metric: &str,
        k: usize,
        tolerance: f64,
        resamples: usize,
        trees: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let metric: Metric = parse(metric)?;
        let opts = LooOptions {
            metric,
            k,
            hit_tolerance: tolerance,
            baseline_resamples: resamples,
            seed,
            rf: (trees > 0).then_some(RfOptions {
                metric,
                trees,
                promising_threshold: DEFAULT_PROMISING_THRESHOLD,
                seed,
            }),
        };
        let kb = &self.inner;
        let report = py.detach(|| loo_evaluate(kb, &opts)).map_err(err)?;
        to_py(py, &report)
    }

    fn __len__(&self) -> usize {
        self.inner.experiments().len()
    }
}

#[pymodule(name = "metakb")]
fn metakb_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", metakb::kb::ENGINE_VERSION)?;
    m.add(
        "ALGORITHMS",
        AlgorithmId::ALL.iter().map(|a| a.name()).collect::<Vec<_>>(),
    )?;
    m.add("METRICS", Metric::ALL.iter().map(|m| m.name()).collect::<Vec<_>>())?;
    m.add_class::<Dataset>()?;
    m.add_class::<KnowledgeBase>()?;
    m.add_function(wrap_pyfunction!(extract_metafeatures, m)?)?;
    m.add_function(wrap_pyfunction!(sample_config, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    Ok(())
}
