//! Leave-one-dataset-out evaluation of the recommenders against a
//! random-pipeline baseline.

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::{recommend_knn, recommend_rf, train_rf_metamodel, KnnOptions, Neighbor, RankedPipeline, RfOptions};
use crate::error::{Error, Result};
use crate::evaluation::Metric;
use crate::kb::{KnowledgeBase, PipelineScore};
use crate::learners::HpConfig;
use crate::rng::{rng, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooOptions {
    pub metric: Metric,
    pub k: usize,
    /// A pick is a hit when its score is at least `(1 - tolerance)` times
    /// the dataset's best.
    pub hit_tolerance: f64,
    pub baseline_resamples: usize,
    pub seed: u64,
    /// Also evaluates the random-forest meta-model when set.
    pub rf: Option<RfOptions>,
}

impl Default for LooOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Accuracy,
            k: super::DEFAULT_K,
            hit_tolerance: 0.05,
            baseline_resamples: 20,
            seed: 0,
            rf: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub pipeline_id: String,
    pub score: f64,
    pub regret: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooDataset {
    pub dataset_id: String,
    pub best_score: f64,
    pub pipelines: usize,
    pub neighbors: Vec<Neighbor>,
    pub knn: Pick,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf: Option<Pick>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub hit_rate: f64,
    pub mean_regret: f64,
    pub median_regret: f64,
    pub max_regret: f64,
    /// Per-dataset regrets, ascending.
    pub regrets: Vec<f64>,
}

impl MethodSummary {
    fn from_picks<'a>(picks: impl Iterator<Item = &'a Pick>) -> Self {
        let picks: Vec<&Pick> = picks.collect();
        let n = picks.len() as f64;
        let mut regrets: Vec<f64> = picks.iter().map(|p| p.regret).collect();
        regrets.sort_by(f64::total_cmp);
        let m = regrets.len();
        let median = if m == 0 {
            f64::NAN
        } else if m % 2 == 1 {
            regrets[m / 2]
        } else {
            (regrets[m / 2 - 1] + regrets[m / 2]) / 2.0
        };
        Self {
            hit_rate: picks.iter().filter(|p| p.hit).count() as f64 / n,
            mean_regret: regrets.iter().sum::<f64>() / n,
            median_regret: median,
            max_regret: regrets.last().copied().unwrap_or(f64::NAN),
            regrets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub resamples: Vec<f64>,
    pub mean_hit_rate: f64,
    /// `(1 + #{resample hit-rate ≥ kNN hit-rate}) / (resamples + 1)`.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub options: LooOptions,
    pub datasets: Vec<LooDataset>,
    pub knn: MethodSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf: Option<MethodSummary>,
    pub baseline: BaselineSummary,
}

fn pick(ranking: &[RankedPipeline], truth: &[PipelineScore], best: f64, tol: f64) -> Option<Pick> {
    // first recommended pipeline that was actually evaluated on the held-out dataset
    ranking.iter().find_map(|r| {
        truth.iter().find(|t| t.pipeline_id == r.pipeline_id).map(|t| Pick {
            pipeline_id: t.pipeline_id.clone(),
            score: t.score,
            regret: best - t.score,
            hit: t.score >= (1.0 - tol) * best,
        })
    })
}

/// Holds out each KB dataset in turn, recommends from the rest, and scores
/// the top pick with the held-out dataset's stored results.
pub fn loo_evaluate(kb: &KnowledgeBase, opts: &LooOptions) -> Result<LooReport> {
    let held: Vec<(&str, Vec<PipelineScore>)> = kb
        .datasets()
        .iter()
        .map(|d| Ok((d.dataset_id.as_str(), kb.dataset_scores(&d.dataset_id, opts.metric)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, s)| !s.is_empty())
        .collect();
    if held.len() < 5 {
        return Err(Error::InvalidConfig(format!(
            "leave-one-out evaluation needs at least 5 datasets with {} scores, found {}",
            opts.metric,
            held.len()
        )));
    }
    let candidates: Vec<HpConfig> = kb.pipelines().map(|p| p.config.clone()).collect();
    let mut rows = Vec::with_capacity(held.len());
    for (id, truth) in &held {
        let best = truth.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
        let mf = &kb.dataset(id).unwrap().metafeatures;
        let rec = recommend_knn(
            kb,
            mf,
            &KnnOptions {
                metric: opts.metric,
                k: opts.k,
                top_n: usize::MAX,
                exclude: Some(id.to_string()),
            },
        )?;
        let knn = pick(&rec.pipelines, truth, best, opts.hit_tolerance)
            .ok_or_else(|| Error::NoExperiments(format!("no recommended pipeline was evaluated on {id}")))?;
        let rf = match &opts.rf {
            Some(rf_opts) => {
                let model = train_rf_metamodel(kb, &RfOptions { metric: opts.metric, ..rf_opts.clone() }, Some(id))?;
                let r = recommend_rf(&model, mf, &candidates, usize::MAX)?;
                pick(&r.pipelines, truth, best, opts.hit_tolerance)
            }
            None => None,
        };
        rows.push(LooDataset {
            dataset_id: id.to_string(),
            best_score: best,
            pipelines: truth.len(),
            neighbors: rec.neighbors,
            knn,
            rf,
        });
    }
    let knn = MethodSummary::from_picks(rows.iter().map(|r| &r.knn));
    let rf = opts
        .rf
        .as_ref()
        .map(|_| MethodSummary::from_picks(rows.iter().filter_map(|r| r.rf.as_ref())));

    let mut r = rng(opts.seed, stream::BASELINE);
    let resamples: Vec<f64> = (0..opts.baseline_resamples)
        .map(|_| {
            let hits = held
                .iter()
                .filter(|(_, truth)| {
                    let best = truth.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
                    truth.choose(&mut r).unwrap().score >= (1.0 - opts.hit_tolerance) * best
                })
                .count();
            hits as f64 / held.len() as f64
        })
        .collect();
    let at_least = resamples.iter().filter(|&&h| h >= knn.hit_rate).count();
    let baseline = BaselineSummary {
        mean_hit_rate: resamples.iter().sum::<f64>() / resamples.len().max(1) as f64,
        p_value: (1 + at_least) as f64 / (resamples.len() + 1) as f64,
        resamples,
    };
    Ok(LooReport {
        options: opts.clone(),
        datasets: rows,
        knn,
        rf,
        baseline,
    })
}
