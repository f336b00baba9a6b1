//! The eight base classifiers, their hyperparameter spaces, and a single
//! fit/predict surface with a versioned model format.

pub mod boosting;
pub mod forest;
pub mod linear;
pub mod preprocess;
pub mod space;
pub mod svm;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

pub use space::{Condition, Dimension, Domain, HpValue, ParamPoint, SearchSpace};

use boosting::{AdaAlgorithm, AdaModel, AdaParams, GbModel, GbParams};
use forest::ForestModel;
use linear::{LinearModel, LogisticParams, Penalty, Schedule, SgdLoss, SgdParams};
use preprocess::{ImputeStrategy, Imputer};
use svm::{Kernel, SmoParams, SvmModel};
use tree::{Criterion, Splitter, Tree, TreeParams};

/// Trees per random-forest / extra-trees ensemble (not tuned).
pub const FOREST_TREES: usize = 100;
/// SMO iteration cap per binary machine.
pub const SVM_MAX_ITER: usize = 100_000;
/// KKT-violation tolerance for SMO.
pub const SVM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlgorithmId {
    LogisticRegression,
    DecisionTree,
    Svm,
    SgdClassifier,
    RandomForest,
    ExtraTrees,
    GradientBoosting,
    #[serde(rename = "ADABOOST")]
    AdaBoost,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 8] = [
        AlgorithmId::LogisticRegression,
        AlgorithmId::DecisionTree,
        AlgorithmId::Svm,
        AlgorithmId::SgdClassifier,
        AlgorithmId::RandomForest,
        AlgorithmId::ExtraTrees,
        AlgorithmId::GradientBoosting,
        AlgorithmId::AdaBoost,
    ];

    pub fn short(self) -> &'static str {
        match self {
            AlgorithmId::LogisticRegression => "lr",
            AlgorithmId::DecisionTree => "dt",
            AlgorithmId::Svm => "svm",
            AlgorithmId::SgdClassifier => "sgd",
            AlgorithmId::RandomForest => "rf",
            AlgorithmId::ExtraTrees => "et",
            AlgorithmId::GradientBoosting => "gb",
            AlgorithmId::AdaBoost => "ada",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::LogisticRegression => "LOGISTIC_REGRESSION",
            AlgorithmId::DecisionTree => "DECISION_TREE",
            AlgorithmId::Svm => "SVM",
            AlgorithmId::SgdClassifier => "SGD_CLASSIFIER",
            AlgorithmId::RandomForest => "RANDOM_FOREST",
            AlgorithmId::ExtraTrees => "EXTRA_TREES",
            AlgorithmId::GradientBoosting => "GRADIENT_BOOSTING",
            AlgorithmId::AdaBoost => "ADABOOST",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&a| a == self).unwrap()
    }

    fn imputes(self) -> bool {
        matches!(self, AlgorithmId::RandomForest | AlgorithmId::ExtraTrees)
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(t) || a.short().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// The hyperparameter space of one algorithm. Integer bounds written
/// `[a, 21)` / `[a, 501)` / `[a, 11)` exclude the upper sentinel; the
/// forest bounds `[1, 20]`, `[2, 20]` and the SVM degree `[2, 3]` are
/// inclusive.
pub fn hp_space(alg: AlgorithmId) -> SearchSpace {
    let bools = ["true", "false"];
    let dims = match alg {
        AlgorithmId::LogisticRegression => vec![
            Dimension::log_real("C", 1e-10, 10.0),
            Dimension::cat("penalty", &["l2", "l1"]),
            Dimension::cat("fit_intercept", &bools),
        ],
        AlgorithmId::DecisionTree => vec![
            Dimension::real("max_features", 0.1, 0.9),
            Dimension::int("min_samples_leaf", 1, 21, true),
            Dimension::int("min_samples_split", 2, 21, true),
            Dimension::cat("criterion", &["entropy", "gini"]),
        ],
        AlgorithmId::Svm => vec![
            Dimension::log_real("C", 1e-10, 500.0),
            Dimension::cat("kernel", &["poly", "rbf"]),
            Dimension::real("coef0", 0.0, 10.0),
            Dimension::log_real("gamma", 1e-3, 1.01),
            Dimension::int("degree", 2, 3, false).when("kernel", &["poly"]),
        ],
        AlgorithmId::SgdClassifier => vec![
            Dimension::cat("loss", &["hinge", "perceptron", "log", "squared_hinge"]),
            Dimension::cat("penalty", &["l2", "l1", "elasticnet"]),
            Dimension::cat("learning_rate", &["const", "opt", "invscaling"]),
            Dimension::cat("fit_intercept", &bools),
            Dimension::real("l1_ratio", 0.0, 1.0).when("penalty", &["elasticnet"]),
            Dimension::real("eta0", 0.0, 5.0),
        ],
        AlgorithmId::RandomForest | AlgorithmId::ExtraTrees => vec![
            Dimension::cat("bootstrap", &bools),
            Dimension::real("max_features", 0.1, 0.9),
            Dimension::int("min_samples_leaf", 1, 20, false),
            Dimension::int("min_samples_split", 2, 20, false),
            Dimension::cat("imputation", &["mean", "median", "mode"]),
            Dimension::cat("criterion", &["entropy", "gini"]),
        ],
        AlgorithmId::GradientBoosting => vec![
            Dimension::real("learning_rate", 0.01, 1.0),
            Dimension::cat("criterion", &["friedman_mse", "mse"]),
            Dimension::int("n_estimators", 50, 501, true),
            Dimension::int("max_depth", 1, 11, true),
            Dimension::int("min_samples_split", 2, 21, true),
        ],
        AlgorithmId::AdaBoost => vec![
            Dimension::cat("algorithm", &["SAMME", "SAMME.R"]),
            Dimension::int("n_estimators", 50, 501, true),
            Dimension::log_real("learning_rate", 0.01, 2.0),
            Dimension::int("max_depth", 1, 11, true),
        ],
    };
    SearchSpace::new(dims).expect("built-in spaces are valid")
}

/// One concrete pipeline: an algorithm, a point in its space, and the
/// seed that makes training deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpConfig {
    pub algorithm: AlgorithmId,
    pub values: ParamPoint,
    #[serde(default)]
    pub seed: u64,
}

impl HpConfig {
    pub fn new(algorithm: AlgorithmId, values: ParamPoint, seed: u64) -> Self {
        Self {
            algorithm,
            values,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        hp_space(self.algorithm).validate(&self.values)
    }

    /// Stable identifier of `(algorithm, values)`; the seed is excluded.
    pub fn pipeline_id(&self) -> String {
        let canonical = serde_json::to_string(&(self.algorithm, &self.values)).unwrap();
        let digest = Sha256::digest(canonical.as_bytes());
        let hex: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
        format!("{}-{hex}", self.algorithm.short())
    }

    fn real(&self, name: &str) -> Result<f64> {
        self.values
            .get(name)
            .and_then(HpValue::as_f64)
            .ok_or_else(|| Error::InvalidConfig(format!("`{name}` missing")))
    }

    fn int(&self, name: &str) -> Result<usize> {
        match self.values.get(name) {
            Some(HpValue::Int(v)) if *v >= 0 => Ok(*v as usize),
            _ => Err(Error::InvalidConfig(format!("`{name}` missing"))),
        }
    }

    fn cat(&self, name: &str) -> Result<&str> {
        self.values
            .get(name)
            .and_then(HpValue::as_str)
            .ok_or_else(|| Error::InvalidConfig(format!("`{name}` missing")))
    }

    fn flag(&self, name: &str) -> Result<bool> {
        Ok(self.cat(name)? == "true")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub n_features: usize,
    pub n_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "fitted", rename_all = "snake_case")]
pub enum ModelState {
    Tree(Tree),
    Forest(ForestModel),
    Linear(LinearModel),
    Svm(SvmModel),
    GradientBoosting(GbModel),
    AdaBoost(AdaModel),
}

pub const MODEL_FORMAT: &str = "metakb-model";
pub const MODEL_VERSION: u32 = 1;

/// A fitted pipeline. Serialized as one JSON document whose header fields
/// (`format`, `version`, `schema`) precede the fitted state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format: String,
    pub version: u32,
    pub schema: Schema,
    pub config: HpConfig,
    pub state: ModelState,
}

/// Anything that labels rows; lets evaluation score baselines and models alike.
pub trait Classifier {
    fn predict_row(&self, row: &[f64]) -> usize;
    fn n_features(&self) -> usize;
}

impl Model {
    pub fn algorithm(&self) -> AlgorithmId {
        self.config.algorithm
    }

    /// Per-class scores; the predicted label is the first maximum.
    pub fn decision(&self, row: &[f64]) -> Vec<f64> {
        let mut buf = Vec::new();
        match &self.state {
            ModelState::Tree(t) => t.leaf_value(row).to_vec(),
            ModelState::Forest(f) => f.proba(row),
            ModelState::Linear(m) => m.decision(row, &mut buf),
            ModelState::Svm(m) => m.decision(row, &mut buf),
            ModelState::GradientBoosting(m) => m.decision(row),
            ModelState::AdaBoost(m) => m.decision(row),
        }
    }

    pub fn predict(&self, rows: &Matrix) -> Result<Vec<usize>> {
        if rows.cols() != self.schema.n_features {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} features, got {}",
                self.schema.n_features,
                rows.cols()
            )));
        }
        if !self.algorithm().imputes() && rows.has_missing() {
            return Err(Error::MissingValues(self.algorithm().to_string()));
        }
        Ok((0..rows.rows()).map(|i| self.predict_row(rows.row(i))).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Model = serde_json::from_str(s)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "unsupported model format {} v{}",
                m.format, m.version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

impl Classifier for Model {
    fn predict_row(&self, row: &[f64]) -> usize {
        tree::argmax(&self.decision(row))
    }

    fn n_features(&self) -> usize {
        self.schema.n_features
    }
}

/// Predicts the most frequent training class (lowest index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct MajorityClass {
    pub class: usize,
    pub n_features: usize,
}

impl MajorityClass {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize) -> Self {
        let mut counts = vec![0usize; n_classes];
        for &v in y {
            counts[v] += 1;
        }
        let class = counts
            .iter()
            .enumerate()
            .fold(0, |b, (i, &c)| if c > counts[b] { i } else { b });
        Self {
            class,
            n_features: x.cols(),
        }
    }
}

impl Classifier for MajorityClass {
    fn predict_row(&self, _row: &[f64]) -> usize {
        self.class
    }

    fn n_features(&self) -> usize {
        self.n_features
    }
}

fn criterion(s: &str) -> Criterion {
    match s {
        "entropy" => Criterion::Entropy,
        "mse" => Criterion::Mse,
        "friedman_mse" => Criterion::FriedmanMse,
        _ => Criterion::Gini,
    }
}

fn penalty(s: &str) -> Penalty {
    match s {
        "l1" => Penalty::L1,
        "elasticnet" => Penalty::ElasticNet,
        _ => Penalty::L2,
    }
}

/// Trains `cfg.algorithm` on `(x, y)`; labels are dense class indices in
/// `0..n_classes`.
pub fn fit(cfg: &HpConfig, x: &Matrix, y: &[usize], n_classes: usize) -> Result<Model> {
    cfg.validate()?;
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::DegenerateTrainingData(format!(
            "{} rows for {} labels",
            x.rows(),
            y.len()
        )));
    }
    if y.iter().any(|&v| v >= n_classes) {
        return Err(Error::DegenerateTrainingData("label outside class set".into()));
    }
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        return Err(Error::DegenerateTrainingData("fewer than 2 classes".into()));
    }
    let alg = cfg.algorithm;
    if !alg.imputes() && x.has_missing() {
        return Err(Error::MissingValues(alg.to_string()));
    }

    let state = match alg {
        AlgorithmId::DecisionTree => {
            let params = TreeParams {
                criterion: criterion(cfg.cat("criterion")?),
                max_features: Some(cfg.real("max_features")?),
                min_samples_leaf: cfg.int("min_samples_leaf")?,
                min_samples_split: cfg.int("min_samples_split")?,
                ..Default::default()
            };
            let mut r = forest::tree_rng(cfg.seed, 0);
            ModelState::Tree(tree::fit_classifier(
                x,
                y,
                None,
                n_classes,
                (0..x.rows()).collect(),
                &params,
                &mut r,
            ))
        }
        AlgorithmId::RandomForest | AlgorithmId::ExtraTrees => {
            let strategy = ImputeStrategy::parse(cfg.cat("imputation")?)
                .ok_or_else(|| Error::InvalidConfig("imputation".into()))?;
            let params = TreeParams {
                criterion: criterion(cfg.cat("criterion")?),
                splitter: if alg == AlgorithmId::ExtraTrees {
                    Splitter::Random
                } else {
                    Splitter::Best
                },
                max_features: Some(cfg.real("max_features")?),
                min_samples_leaf: cfg.int("min_samples_leaf")?,
                min_samples_split: cfg.int("min_samples_split")?,
                ..Default::default()
            };
            ModelState::Forest(forest::fit_forest(
                x,
                y,
                n_classes,
                Imputer::fit(x, strategy),
                &params,
                FOREST_TREES,
                cfg.flag("bootstrap")?,
                cfg.seed,
            ))
        }
        AlgorithmId::LogisticRegression => {
            let p = LogisticParams {
                c: cfg.real("C")?,
                penalty: penalty(cfg.cat("penalty")?),
                fit_intercept: cfg.flag("fit_intercept")?,
                max_iter: 1000,
                tol: 1e-6,
            };
            ModelState::Linear(linear::fit_logistic(x, y, n_classes, &p))
        }
        AlgorithmId::SgdClassifier => {
            let p = SgdParams {
                loss: match cfg.cat("loss")? {
                    "hinge" => SgdLoss::Hinge,
                    "perceptron" => SgdLoss::Perceptron,
                    "log" => SgdLoss::Log,
                    _ => SgdLoss::SquaredHinge,
                },
                penalty: penalty(cfg.cat("penalty")?),
                l1_ratio: cfg.real("l1_ratio").unwrap_or(0.0),
                schedule: match cfg.cat("learning_rate")? {
                    "const" => Schedule::Constant,
                    "opt" => Schedule::Optimal,
                    _ => Schedule::InvScaling,
                },
                eta0: cfg.real("eta0")?,
                fit_intercept: cfg.flag("fit_intercept")?,
                alpha: SgdParams::ALPHA,
                power_t: SgdParams::POWER_T,
                max_epochs: 100,
                tol: 1e-3,
                n_iter_no_change: 5,
            };
            let mut r = rng::rng(cfg.seed, rng::stream::LEARNER);
            ModelState::Linear(linear::fit_sgd(x, y, n_classes, &p, &mut r))
        }
        AlgorithmId::Svm => {
            let gamma = cfg.real("gamma")?;
            let kernel = match cfg.cat("kernel")? {
                "rbf" => Kernel::Rbf { gamma },
                _ => Kernel::Poly {
                    gamma,
                    coef0: cfg.real("coef0")?,
                    degree: cfg.int("degree")? as i32,
                },
            };
            let p = SmoParams {
                c: cfg.real("C")?,
                tol: SVM_TOL,
                max_iter: SVM_MAX_ITER,
            };
            ModelState::Svm(svm::fit_svm(x, y, n_classes, kernel, &p))
        }
        AlgorithmId::GradientBoosting => {
            let p = GbParams {
                learning_rate: cfg.real("learning_rate")?,
                n_estimators: cfg.int("n_estimators")?,
                max_depth: cfg.int("max_depth")?,
                min_samples_split: cfg.int("min_samples_split")?,
                criterion: criterion(cfg.cat("criterion")?),
            };
            let mut r = rng::rng(cfg.seed, rng::stream::LEARNER);
            ModelState::GradientBoosting(boosting::fit_gb(x, y, n_classes, &p, &mut r))
        }
        AlgorithmId::AdaBoost => {
            let p = AdaParams {
                algorithm: if cfg.cat("algorithm")? == "SAMME" {
                    AdaAlgorithm::Samme
                } else {
                    AdaAlgorithm::SammeR
                },
                n_estimators: cfg.int("n_estimators")?,
                learning_rate: cfg.real("learning_rate")?,
                max_depth: cfg.int("max_depth")?,
            };
            let mut r = rng::rng(cfg.seed, rng::stream::LEARNER);
            ModelState::AdaBoost(boosting::fit_adaboost(x, y, n_classes, &p, &mut r))
        }
    };
    Ok(Model {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        schema: Schema {
            n_features: x.cols(),
            n_classes,
        },
        config: cfg.clone(),
        state,
    })
}

pub fn predict(model: &Model, rows: &Matrix) -> Result<Vec<usize>> {
    model.predict(rows)
}
