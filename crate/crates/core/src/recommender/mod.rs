//! Pipeline recommendation from the knowledge base: nearest datasets in
//! standardized meta-feature space with distance-weighted score pooling,
//! and a random-forest meta-model over meta-features and pipeline
//! encodings.

mod loo;
mod meta_model;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::Metric;
use crate::kb::KnowledgeBase;
use crate::learners::{AlgorithmId, HpConfig};
use crate::metafeatures::MetaFeatureVector;

pub use loo::{loo_evaluate, BaselineSummary, LooDataset, LooOptions, LooReport, MethodSummary, Pick};
pub use meta_model::{
    encode_pipeline, pipeline_encoding_names, recommend_rf, train_rf_metamodel, MetaModel, RfOptions,
    DEFAULT_META_TREES, DEFAULT_PROMISING_THRESHOLD,
};

pub const DEFAULT_K: usize = 5;
pub const WEIGHT_EPS: f64 = 1e-6;

/// Per-entry z-score statistics learned from a set of meta-feature
/// vectors. Entries that are constant (or never present) get no scale
/// and do not take part in distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub catalogue_version: String,
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation; `None` marks an unusable entry.
    pub scale: Vec<Option<f64>>,
}

impl Scaling {
    pub fn fit(vectors: &[&MetaFeatureVector]) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyKnowledgeBase)?;
        check_catalogue(&first.catalogue_version, vectors.iter().map(|v| &v.catalogue_version))?;
        let names: Vec<String> = first.names().map(String::from).collect();
        let columns: Vec<Vec<Option<f64>>> = vectors.iter().map(|v| align(v, &names)).collect();
        let mut mean = Vec::with_capacity(names.len());
        let mut scale = Vec::with_capacity(names.len());
        for j in 0..names.len() {
            let present: Vec<f64> = columns.iter().filter_map(|c| c[j]).collect();
            if present.is_empty() {
                mean.push(0.0);
                scale.push(None);
                continue;
            }
            let m = present.iter().sum::<f64>() / present.len() as f64;
            let var = present.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / present.len() as f64;
            let sd = var.sqrt();
            mean.push(m);
            scale.push((sd > 1e-12 * m.abs().max(1.0)).then_some(sd));
        }
        Ok(Self {
            catalogue_version: first.catalogue_version.clone(),
            names,
            mean,
            scale,
        })
    }

    /// Leaves values untouched: zero mean, unit scale on every entry.
    pub fn identity(names: &[&str]) -> Self {
        Self {
            catalogue_version: crate::metafeatures::CATALOGUE_VERSION.into(),
            names: names.iter().map(|s| s.to_string()).collect(),
            mean: vec![0.0; names.len()],
            scale: vec![Some(1.0); names.len()],
        }
    }

    pub fn usable(&self) -> usize {
        self.scale.iter().filter(|s| s.is_some()).count()
    }

    /// Standardized values in `names` order; missing or unusable entries
    /// are `None`.
    pub fn standardize(&self, v: &MetaFeatureVector) -> Result<Vec<Option<f64>>> {
        check_catalogue(&self.catalogue_version, [&v.catalogue_version])?;
        Ok(align(v, &self.names)
            .into_iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| Some((x? - m) / (*s)?))
            .collect())
    }
}

fn check_catalogue<'a>(expected: &str, got: impl IntoIterator<Item = &'a String>) -> Result<()> {
    for g in got {
        if g != expected {
            return Err(Error::CatalogueMismatch {
                expected: expected.into(),
                got: g.clone(),
            });
        }
    }
    Ok(())
}

fn align(v: &MetaFeatureVector, names: &[String]) -> Vec<Option<f64>> {
    let same_order = v.len() == names.len() && v.names().zip(names).all(|(a, b)| a == b);
    if same_order {
        v.values()
    } else {
        let by_name: HashMap<&str, Option<f64>> = v.entries().iter().map(|(k, x)| (k.as_str(), *x)).collect();
        names.iter().map(|n| by_name.get(n.as_str()).copied().flatten()).collect()
    }
}

/// Euclidean distance between standardized vectors. Entries missing in
/// either vector are skipped and the squared sum is rescaled by
/// `dims / used`, where `dims` counts the entries the scaling keeps.
/// With no usable entries at all every distance is zero.
pub fn standardized_distance(a: &[Option<f64>], b: &[Option<f64>], dims: usize) -> Result<f64> {
    if dims == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            sum += (x - y) * (x - y);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::NoUsableDimensions);
    }
    Ok((sum * dims as f64 / used as f64).sqrt())
}

pub fn euclidean_distance(a: &MetaFeatureVector, b: &MetaFeatureVector, scaling: &Scaling) -> Result<f64> {
    standardized_distance(&scaling.standardize(a)?, &scaling.standardize(b)?, scaling.usable())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub dataset_id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub k: usize,
    pub neighbors: Vec<Neighbor>,
    pub scaling: Scaling,
}

/// Standardized meta-feature vectors of a set of KB datasets, ready for
/// nearest-dataset queries.
#[derive(Debug, Clone)]
pub struct MetaIndex {
    scaling: Scaling,
    ids: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl MetaIndex {
    pub fn new(vectors: &[&MetaFeatureVector]) -> Result<Self> {
        let scaling = Scaling::fit(vectors)?;
        let rows = vectors.iter().map(|v| scaling.standardize(v)).collect::<Result<_>>()?;
        Ok(Self {
            ids: vectors.iter().map(|v| v.dataset_id.clone()).collect(),
            scaling,
            rows,
        })
    }

    /// Indexes the KB datasets that have successful experiments for
    /// `metric`, leaving out `exclude`. Scaling statistics come from the
    /// indexed datasets only.
    pub fn from_kb(kb: &KnowledgeBase, metric: Metric, exclude: Option<&str>) -> Result<Self> {
        let with_scores: std::collections::HashSet<&str> = kb
            .experiments()
            .iter()
            .filter(|e| e.mean(metric).is_some())
            .map(|e| e.dataset_id.as_str())
            .collect();
        if kb.datasets().is_empty() {
            return Err(Error::EmptyKnowledgeBase);
        }
        let vectors: Vec<&MetaFeatureVector> = kb
            .datasets()
            .iter()
            .filter(|d| Some(d.dataset_id.as_str()) != exclude && with_scores.contains(d.dataset_id.as_str()))
            .map(|d| &d.metafeatures)
            .collect();
        if vectors.is_empty() {
            return Err(Error::NoExperiments(format!("no indexed dataset has {metric} scores")));
        }
        Self::new(&vectors)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// The `k` indexed datasets closest to `query`, nearest first with ties
    /// broken by dataset id. Datasets sharing no present entry with the
    /// query are skipped.
    pub fn knd(&self, query: &MetaFeatureVector, k: usize) -> Result<NeighborSet> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let q = self.scaling.standardize(query)?;
        let dims = self.scaling.usable();
        let dists: Vec<Result<f64>> = self
            .rows
            .par_iter()
            .with_min_len(64)
            .map(|r| standardized_distance(&q, r, dims))
            .collect();
        let mut neighbors: Vec<Neighbor> = self
            .ids
            .iter()
            .zip(dists)
            .filter_map(|(id, d)| {
                d.ok().map(|distance| Neighbor {
                    dataset_id: id.clone(),
                    distance,
                })
            })
            .collect();
        if neighbors.is_empty() {
            return Err(Error::NoUsableDimensions);
        }
        neighbors.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.dataset_id.cmp(&b.dataset_id)));
        neighbors.truncate(k);
        Ok(NeighborSet {
            k,
            neighbors,
            scaling: self.scaling.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Knn,
    Rf,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Ok(Method::Knn),
            "rf" => Ok(Method::Rf),
            _ => Err(Error::InvalidConfig(format!("unknown method `{s}` (expected knn or rf)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub dataset_id: String,
    pub weight: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPipeline {
    pub pipeline_id: String,
    pub algorithm: AlgorithmId,
    pub config: HpConfig,
    /// Weighted neighbor score for kNN, promising-probability for the
    /// meta-model.
    pub predicted_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_runtime_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub support: Vec<Support>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub method: Method,
    pub metric: Metric,
    pub neighbors: Vec<Neighbor>,
    pub pipelines: Vec<RankedPipeline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnOptions {
    pub metric: Metric,
    pub k: usize,
    pub top_n: usize,
    /// Dataset id kept out of the neighbor search, e.g. the query itself.
    pub exclude: Option<String>,
}

impl Default for KnnOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Accuracy,
            k: DEFAULT_K,
            top_n: 10,
            exclude: None,
        }
    }
}

/// Normalized inverse-distance weights.
pub fn neighbor_weights(distances: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = distances.iter().map(|d| 1.0 / (d + WEIGHT_EPS)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Pools the neighbors' stored scores into one ranking. Each pipeline's
/// prediction averages the scores of the neighbors that evaluated it,
/// weighted by `1/(d + ε)` renormalized over those neighbors.
pub fn pool_neighbors(kb: &KnowledgeBase, neighbors: &[Neighbor], metric: Metric, top_n: usize) -> Result<Vec<RankedPipeline>> {
    struct Acc {
        config: HpConfig,
        algorithm: AlgorithmId,
        parts: Vec<(usize, f64, f64)>,
    }
    let raw: Vec<f64> = neighbors.iter().map(|n| 1.0 / (n.distance + WEIGHT_EPS)).collect();
    let mut pooled: BTreeMap<String, Acc> = BTreeMap::new();
    for (i, n) in neighbors.iter().enumerate() {
        for s in kb.dataset_scores(&n.dataset_id, metric)? {
            pooled
                .entry(s.pipeline_id)
                .or_insert_with(|| Acc {
                    config: s.config,
                    algorithm: s.algorithm,
                    parts: Vec::new(),
                })
                .parts
                .push((i, s.score, s.runtime_secs));
        }
    }
    let mut out: Vec<RankedPipeline> = pooled
        .into_iter()
        .map(|(pipeline_id, acc)| {
            let total: f64 = acc.parts.iter().map(|&(i, _, _)| raw[i]).sum();
            let support: Vec<Support> = acc
                .parts
                .iter()
                .map(|&(i, score, _)| Support {
                    dataset_id: neighbors[i].dataset_id.clone(),
                    weight: raw[i] / total,
                    score,
                })
                .collect();
            let predicted_score = support.iter().map(|s| s.weight * s.score).sum();
            let runtime = support.iter().zip(&acc.parts).map(|(s, p)| s.weight * p.2).sum();
            RankedPipeline {
                pipeline_id,
                algorithm: acc.algorithm,
                config: acc.config,
                predicted_score,
                predicted_runtime_secs: Some(runtime),
                support,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.predicted_score
            .total_cmp(&a.predicted_score)
            .then(a.predicted_runtime_secs.unwrap().total_cmp(&b.predicted_runtime_secs.unwrap()))
            .then_with(|| a.pipeline_id.cmp(&b.pipeline_id))
    });
    out.truncate(top_n);
    Ok(out)
}

/// kNN recommendation against a prebuilt index (which must come from the
/// same KB).
pub fn recommend_knn_indexed(
    kb: &KnowledgeBase,
    index: &MetaIndex,
    query: &MetaFeatureVector,
    opts: &KnnOptions,
) -> Result<Recommendation> {
    let set = index.knd(query, opts.k)?;
    let neighbors: Vec<Neighbor> = match &opts.exclude {
        Some(x) => set.neighbors.into_iter().filter(|n| &n.dataset_id != x).collect(),
        None => set.neighbors,
    };
    Ok(Recommendation {
        method: Method::Knn,
        metric: opts.metric,
        pipelines: pool_neighbors(kb, &neighbors, opts.metric, opts.top_n)?,
        neighbors,
    })
}

/// Recommends pipelines for a dataset described by `query`.
pub fn recommend_knn(kb: &KnowledgeBase, query: &MetaFeatureVector, opts: &KnnOptions) -> Result<Recommendation> {
    let index = MetaIndex::from_kb(kb, opts.metric, opts.exclude.as_deref())?;
    recommend_knn_indexed(kb, &index, query, opts)
}
