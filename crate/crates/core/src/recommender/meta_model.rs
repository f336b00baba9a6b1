use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Method, RankedPipeline, Recommendation};
use crate::error::{Error, Result};
use crate::evaluation::Metric;
use crate::kb::KnowledgeBase;
use crate::learners::forest::{fit_forest, ForestModel};
use crate::learners::preprocess::{ImputeStrategy, Imputer};
use crate::learners::tree::TreeParams;
use crate::learners::{hp_space, AlgorithmId, HpConfig};
use crate::matrix::Matrix;
use crate::metafeatures::MetaFeatureVector;
use crate::rng::{derive_seed, stream};

pub const DEFAULT_META_TREES: usize = 500;
pub const DEFAULT_PROMISING_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfOptions {
    pub metric: Metric,
    pub trees: usize,
    /// A pipeline is promising on a dataset when its score is at least
    /// `(1 - threshold)` times the dataset's best.
    pub promising_threshold: f64,
    pub seed: u64,
}

impl Default for RfOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Accuracy,
            trees: DEFAULT_META_TREES,
            promising_threshold: DEFAULT_PROMISING_THRESHOLD,
            seed: 0,
        }
    }
}

/// Column names of [`encode_pipeline`]: one indicator per algorithm, then
/// every algorithm's hyperparameters as `<short>.<name>`.
pub fn pipeline_encoding_names() -> Vec<String> {
    let mut names: Vec<String> = AlgorithmId::ALL.iter().map(|a| format!("is_{}", a.short())).collect();
    for a in AlgorithmId::ALL {
        for d in hp_space(a).dimensions() {
            names.push(format!("{}.{}", a.short(), d.name));
        }
    }
    names
}

/// Algorithm one-hot followed by per-algorithm hyperparameter blocks with
/// values mapped into `[0, 1]`; entries of other algorithms and inactive
/// conditionals are -1.
pub fn encode_pipeline(cfg: &HpConfig) -> Vec<f64> {
    let mut out: Vec<f64> = AlgorithmId::ALL
        .iter()
        .map(|&a| f64::from(u8::from(a == cfg.algorithm)))
        .collect();
    for a in AlgorithmId::ALL {
        for d in hp_space(a).dimensions() {
            let v = if a == cfg.algorithm {
                cfg.values.get(&d.name).map_or(-1.0, |v| d.domain.to_unit(v))
            } else {
                -1.0
            };
            out.push(v);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub datasets: usize,
    pub rows: usize,
    pub promising: usize,
}

/// Random forest predicting whether a pipeline is promising on a dataset
/// from the dataset's meta-features and the pipeline encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub catalogue_version: String,
    pub metafeature_names: Vec<String>,
    pub options: RfOptions,
    pub training: TrainingSummary,
    forest: ForestModel,
}

fn features(mf: &MetaFeatureVector, names: &[String], cfg: &HpConfig) -> Vec<f64> {
    let mut row: Vec<f64> = super::align(mf, names).into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    row.extend(encode_pipeline(cfg));
    row
}

impl MetaModel {
    pub fn trees(&self) -> usize {
        self.forest.trees.len()
    }

    /// Probability that `cfg` is promising on the dataset described by `mf`.
    pub fn probability(&self, mf: &MetaFeatureVector, cfg: &HpConfig) -> Result<f64> {
        if mf.catalogue_version != self.catalogue_version {
            return Err(Error::CatalogueMismatch {
                expected: self.catalogue_version.clone(),
                got: mf.catalogue_version.clone(),
            });
        }
        Ok(self.forest.proba(&features(mf, &self.metafeature_names, cfg))[1])
    }
}

/// Trains the meta-model on every dataset of `kb` except `exclude`. Each
/// pipeline's latest successful score on a dataset is labelled against
/// that dataset's best; pipelines that only ever failed there count as
/// not promising.
pub fn train_rf_metamodel(kb: &KnowledgeBase, opts: &RfOptions, exclude: Option<&str>) -> Result<MetaModel> {
    if !(0.0..=1.0).contains(&opts.promising_threshold) {
        return Err(Error::InvalidConfig("promising threshold must lie in [0, 1]".into()));
    }
    if opts.trees == 0 {
        return Err(Error::InvalidConfig("meta-model needs at least one tree".into()));
    }
    let datasets: Vec<_> = kb
        .datasets()
        .iter()
        .filter(|d| Some(d.dataset_id.as_str()) != exclude)
        .collect();
    let first = datasets.first().ok_or(Error::EmptyKnowledgeBase)?;
    let names: Vec<String> = first.metafeatures.names().map(String::from).collect();
    let catalogue = first.metafeatures.catalogue_version.clone();

    let mut failed: BTreeMap<(&str, &str), &HpConfig> = BTreeMap::new();
    for e in kb.experiments() {
        if !e.ok() {
            failed.insert((&e.dataset_id, &e.pipeline_id), &e.config);
        }
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut used = 0;
    for d in &datasets {
        let scores = kb.dataset_scores(&d.dataset_id, opts.metric)?;
        if scores.is_empty() {
            continue;
        }
        used += 1;
        let best = scores.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
        let cut = (1.0 - opts.promising_threshold) * best;
        for s in &scores {
            rows.push(features(&d.metafeatures, &names, &s.config));
            labels.push(usize::from(s.score >= cut));
        }
        for ((ds, pid), cfg) in &failed {
            if *ds == d.dataset_id && !scores.iter().any(|s| s.pipeline_id == *pid) {
                rows.push(features(&d.metafeatures, &names, cfg));
                labels.push(0);
            }
        }
    }
    if used < 2 {
        return Err(Error::NoExperiments(format!(
            "meta-model needs at least two datasets with {} scores",
            opts.metric
        )));
    }
    let promising = labels.iter().sum::<usize>();
    if promising == labels.len() {
        return Err(Error::DegenerateLabels("every pipeline is labelled promising"));
    }
    if promising == 0 {
        return Err(Error::DegenerateLabels("no pipeline is labelled promising"));
    }
    let x = Matrix::from_rows(&rows);
    let imputer = Imputer::fit(&x, ImputeStrategy::Median);
    let params = TreeParams {
        max_features: Some((x.cols() as f64).sqrt() / x.cols() as f64),
        ..Default::default()
    };
    let forest = fit_forest(
        &x,
        &labels,
        2,
        imputer,
        &params,
        opts.trees,
        true,
        derive_seed(opts.seed, stream::META_MODEL),
    );
    Ok(MetaModel {
        catalogue_version: catalogue,
        metafeature_names: names,
        options: opts.clone(),
        training: TrainingSummary {
            datasets: used,
            rows: rows.len(),
            promising,
        },
        forest,
    })
}

/// Ranks `candidates` by promising-probability, ties by pipeline id.
pub fn recommend_rf(
    model: &MetaModel,
    query: &MetaFeatureVector,
    candidates: &[HpConfig],
    top_n: usize,
) -> Result<Recommendation> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate pipelines".into()));
    }
    let mut ranked = candidates
        .iter()
        .map(|c| {
            Ok(RankedPipeline {
                pipeline_id: c.pipeline_id(),
                algorithm: c.algorithm,
                config: c.clone(),
                predicted_score: model.probability(query, c)?,
                predicted_runtime_secs: None,
                support: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        b.predicted_score
            .total_cmp(&a.predicted_score)
            .then_with(|| a.pipeline_id.cmp(&b.pipeline_id))
    });
    ranked.truncate(top_n);
    Ok(Recommendation {
        method: Method::Rf,
        metric: model.options.metric,
        neighbors: Vec::new(),
        pipelines: ranked,
    })
}
