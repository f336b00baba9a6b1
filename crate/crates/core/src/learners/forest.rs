use rand::Rng;
use serde::{Deserialize, Serialize};

use super::preprocess::Imputer;
use super::tree::{fit_classifier, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::rng;

/// Random forest / extra-trees ensemble with a train-fitted imputer in
/// front. Prediction averages leaf class distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub imputer: Imputer,
    pub trees: Vec<Tree>,
    pub n_classes: usize,
}

impl ForestModel {
    pub fn proba_imputed(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.leaf_value(row)) {
                *a += v;
            }
        }
        let m = self.trees.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    }

    pub fn proba(&self, row: &[f64]) -> Vec<f64> {
        if row.iter().any(|v| v.is_nan()) {
            let filled: Vec<f64> = row
                .iter()
                .zip(&self.imputer.fill)
                .map(|(v, f)| if v.is_nan() { *f } else { *v })
                .collect();
            self.proba_imputed(&filled)
        } else {
            self.proba_imputed(row)
        }
    }
}

/// Tree `i` draws from the stream `(seed, LEARNER, i)`, which is the same
/// stream a single decision tree with `seed` uses.
pub fn tree_rng(seed: u64, index: usize) -> rng::EngineRng {
    rng::rng(seed, rng::stream::LEARNER ^ ((index as u64) << 16))
}

pub fn fit_forest(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    imputer: Imputer,
    params: &TreeParams,
    n_trees: usize,
    bootstrap: bool,
    seed: u64,
) -> ForestModel {
    let xi = imputer.transform(x);
    let n = xi.rows();
    let trees = (0..n_trees)
        .map(|t| {
            let mut r = tree_rng(seed, t);
            let rows: Vec<usize> = if bootstrap {
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_classifier(&xi, y, None, n_classes, rows, params, &mut r)
        })
        .collect();
    ForestModel {
        imputer,
        trees,
        n_classes,
    }
}
