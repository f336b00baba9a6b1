use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("target column `{0}` not present in header")]
    TargetMissing(String),

    #[error("target has a single class after dropping missing labels")]
    SingleClassTarget,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("class {class} has {count} instances, fewer than k = {k}")]
    ClassTooSmall { class: usize, count: usize, k: usize },

    #[error("fold count k = {k} out of range for n = {n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("degenerate training data: {0}")]
    DegenerateTrainingData(String),

    #[error("missing values in input; {0} requires imputed features")]
    MissingValues(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("empty confusion matrix")]
    EmptyMatrix,

    #[error("fit failed in repeat {repeat}, fold {fold}: {source}")]
    FoldFit {
        repeat: usize,
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grid of {size} points exceeds cap {cap}")]
    GridTooLarge { size: u128, cap: usize },

    #[error("invalid search parameters: {0}")]
    InvalidSearch(String),

    #[error("referential integrity violation: {0}")]
    Integrity(String),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("no experiments for metric `{0}`")]
    NoExperiments(String),

    #[error("knowledge base has no datasets with meta-features")]
    EmptyKnowledgeBase,

    #[error("no usable meta-feature dimensions for distance")]
    NoUsableDimensions,

    #[error("promising labels are degenerate (all {0})")]
    DegenerateLabels(&'static str),

    #[error("catalogue version mismatch: expected {expected}, got {got}")]
    CatalogueMismatch { expected: String, got: String },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("corrupt store: {0}")]
    Corrupt(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// True for errors caused by the input data rather than by the engine.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Serde(_) | Error::Corrupt(_))
    }
}
