//! Gradient boosting on the logistic loss (one-vs-rest) and AdaBoost with
//! the discrete SAMME and probability-weighted SAMME.R updates.

use serde::{Deserialize, Serialize};

use super::linear::ovr_targets;
use super::tree::{argmax, fit_classifier, fit_regressor, Criterion, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::rng::EngineRng;

#[derive(Debug, Clone, Copy)]
pub struct GbParams {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub criterion: Criterion,
}

/// One additive logistic model per positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbModel {
    pub init: Vec<f64>,
    pub learning_rate: f64,
    pub stages: Vec<Vec<Tree>>,
    pub n_classes: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl GbModel {
    pub fn raw(&self, row: &[f64]) -> Vec<f64> {
        self.init
            .iter()
            .zip(&self.stages)
            .map(|(f0, trees)| {
                f0 + self.learning_rate * trees.iter().map(|t| t.leaf_value(row)[0]).sum::<f64>()
            })
            .collect()
    }

    pub fn decision(&self, row: &[f64]) -> Vec<f64> {
        let raw = self.raw(row);
        if self.n_classes == 2 {
            vec![-raw[0], raw[0]]
        } else {
            raw
        }
    }
}

pub fn fit_gb(x: &Matrix, y: &[usize], n_classes: usize, p: &GbParams, rng: &mut EngineRng) -> GbModel {
    let n = x.rows();
    let tree_params = TreeParams {
        criterion: p.criterion,
        max_depth: Some(p.max_depth),
        min_samples_split: p.min_samples_split,
        ..Default::default()
    };
    let mut init = Vec::new();
    let mut stages = Vec::new();
    for t in ovr_targets(y, n_classes) {
        let target: Vec<f64> = t.iter().map(|&v| f64::from(u8::from(v > 0.0))).collect();
        let prior = (target.iter().sum::<f64>() / n as f64).clamp(1e-12, 1.0 - 1e-12);
        let f0 = (prior / (1.0 - prior)).ln();
        let mut f = vec![f0; n];
        let mut trees = Vec::with_capacity(p.n_estimators);
        for _ in 0..p.n_estimators {
            let prob: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
            let resid: Vec<f64> = target.iter().zip(&prob).map(|(y, q)| y - q).collect();
            if resid.iter().all(|r| r.abs() < 1e-10) {
                break;
            }
            let newton = |rows: &[usize]| {
                let num: f64 = rows.iter().map(|&i| resid[i]).sum();
                let den: f64 = rows.iter().map(|&i| prob[i] * (1.0 - prob[i])).sum();
                if den.abs() < 1e-150 {
                    0.0
                } else {
                    num / den
                }
            };
            let tree = fit_regressor(x, &resid, (0..n).collect(), &tree_params, Some(&newton), rng);
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += p.learning_rate * tree.leaf_value(x.row(i))[0];
            }
            trees.push(tree);
        }
        init.push(f0);
        stages.push(trees);
    }
    GbModel {
        init,
        learning_rate: p.learning_rate,
        stages,
        n_classes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdaAlgorithm {
    #[serde(rename = "SAMME")]
    Samme,
    #[serde(rename = "SAMME.R")]
    SammeR,
}

#[derive(Debug, Clone, Copy)]
pub struct AdaParams {
    pub algorithm: AdaAlgorithm,
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaModel {
    pub algorithm: AdaAlgorithm,
    pub estimators: Vec<Tree>,
    pub weights: Vec<f64>,
    pub n_classes: usize,
}

const PROBA_EPS: f64 = f64::EPSILON;

impl AdaModel {
    pub fn decision(&self, row: &[f64]) -> Vec<f64> {
        let k = self.n_classes;
        let mut score = vec![0.0; k];
        for (tree, &w) in self.estimators.iter().zip(&self.weights) {
            match self.algorithm {
                AdaAlgorithm::Samme => score[tree.predict_class(row)] += w,
                AdaAlgorithm::SammeR => {
                    let logp: Vec<f64> = tree
                        .leaf_value(row)
                        .iter()
                        .map(|q| q.max(PROBA_EPS).ln())
                        .collect();
                    let mean = logp.iter().sum::<f64>() / k as f64;
                    for (s, lp) in score.iter_mut().zip(&logp) {
                        *s += (k as f64 - 1.0) * (lp - mean);
                    }
                }
            }
        }
        score
    }
}

pub fn fit_adaboost(x: &Matrix, y: &[usize], n_classes: usize, p: &AdaParams, rng: &mut EngineRng) -> AdaModel {
    let n = x.rows();
    let k = n_classes as f64;
    let tree_params = TreeParams {
        criterion: Criterion::Gini,
        max_depth: Some(p.max_depth),
        ..Default::default()
    };
    let mut w = vec![1.0 / n as f64; n];
    let mut estimators = Vec::new();
    let mut weights = Vec::new();
    for t in 0..p.n_estimators {
        let tree = fit_classifier(x, y, Some(&w), n_classes, (0..n).collect(), &tree_params, rng);
        let proba: Vec<Vec<f64>> = (0..n).map(|i| tree.leaf_value(x.row(i)).to_vec()).collect();
        let wrong: Vec<bool> = (0..n).map(|i| argmax(&proba[i]) != y[i]).collect();
        let total: f64 = w.iter().sum();
        let err = w.iter().zip(&wrong).filter(|(_, &b)| b).map(|(v, _)| v).sum::<f64>() / total;

        if err <= 0.0 {
            estimators.push(tree);
            weights.push(1.0);
            break;
        }
        match p.algorithm {
            AdaAlgorithm::Samme => {
                if err >= 1.0 - 1.0 / k {
                    // worse than chance; keep it only if nothing else exists
                    if estimators.is_empty() {
                        estimators.push(tree);
                        weights.push(1.0);
                    }
                    break;
                }
                let alpha = p.learning_rate * (((1.0 - err) / err).ln() + (k - 1.0).ln());
                estimators.push(tree);
                weights.push(alpha);
                if t + 1 < p.n_estimators {
                    for (wi, &bad) in w.iter_mut().zip(&wrong) {
                        if bad && *wi > 0.0 {
                            *wi *= alpha.exp();
                        }
                    }
                }
            }
            AdaAlgorithm::SammeR => {
                estimators.push(tree);
                weights.push(1.0);
                if t + 1 < p.n_estimators {
                    for i in 0..n {
                        let s: f64 = proba[i]
                            .iter()
                            .enumerate()
                            .map(|(c, q)| {
                                let code = if c == y[i] { 1.0 } else { -1.0 / (k - 1.0) };
                                code * q.max(PROBA_EPS).ln()
                            })
                            .sum();
                        let ew = -p.learning_rate * (k - 1.0) / k * s;
                        if w[i] > 0.0 || ew < 0.0 {
                            w[i] *= ew.exp();
                        }
                    }
                }
            }
        }
        let total: f64 = w.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            break;
        }
        w.iter_mut().for_each(|v| *v /= total);
    }
    AdaModel {
        algorithm: p.algorithm,
        estimators,
        weights,
        n_classes,
    }
}
