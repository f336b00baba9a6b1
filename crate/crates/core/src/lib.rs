//! Meta-learning engine: dataset characterization, a catalogue of base
//! classifiers with hyperparameter search, a persistent knowledge base of
//! evaluated pipelines, and nearest-dataset pipeline recommendation.

pub mod alloc;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod folds;
pub mod hpo;
pub mod kb;
pub mod learners;
pub mod metafeatures;
pub mod recommender;
pub mod matrix;
pub mod rng;

pub use dataset::{load_dataset, Column, ColumnKind, Dataset};
pub use error::{Error, Result};
pub use folds::{stratified_kfold, FoldPlan};
pub use learners::{fit, hp_space, AlgorithmId, HpConfig, HpValue, Model, ParamPoint, SearchSpace};
pub use matrix::Matrix;
