use rand::seq::SliceRandom;
use rand::Rng;

use super::info::{codes, mutual_information};
use super::Entries;
use crate::dataset::{ColumnKind, Dataset};
use crate::folds::stratified_kfold_labels;
use crate::learners::tree::{self, Criterion, TreeParams};
use crate::matrix::Matrix;
use crate::rng::{self, stream};

pub(super) const NAMES: &[&str] = &[
    "lm_naive_bayes",
    "lm_one_nn",
    "lm_elite_nn",
    "lm_decision_node",
    "lm_random_node",
    "rel_naive_bayes_vs_one_nn",
    "rel_naive_bayes_vs_elite_nn",
    "rel_naive_bayes_vs_decision_node",
    "rel_naive_bayes_vs_random_node",
    "rel_one_nn_vs_elite_nn",
    "rel_one_nn_vs_decision_node",
    "rel_one_nn_vs_random_node",
    "rel_elite_nn_vs_decision_node",
    "rel_elite_nn_vs_random_node",
    "rel_decision_node_vs_random_node",
    "sub_naive_bayes",
    "sub_one_nn",
    "sub_elite_nn",
    "sub_decision_node",
    "sub_random_node",
];

pub const MIN_INSTANCES: usize = 10;
pub const FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Landmarker {
    NaiveBayes,
    OneNn,
    EliteNn,
    DecisionNode,
    RandomNode,
}

pub const LANDMARKERS: [Landmarker; 5] = [
    Landmarker::NaiveBayes,
    Landmarker::OneNn,
    Landmarker::EliteNn,
    Landmarker::DecisionNode,
    Landmarker::RandomNode,
];

struct Task<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    kinds: &'a [ColumnKind],
    n_classes: usize,
    random_attr: usize,
}

/// Fills missing cells of `rows` with the column means over `train`.
fn imputed(x: &Matrix, rows: &[usize], train: &[usize]) -> Matrix {
    let p = x.cols();
    let fill: Vec<f64> = (0..p)
        .map(|j| {
            let v: Vec<f64> = train.iter().map(|&i| x.get(i, j)).filter(|v| !v.is_nan()).collect();
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        })
        .collect();
    let mut out = x.select_rows(rows);
    for i in 0..out.rows() {
        for j in 0..p {
            if out.get(i, j).is_nan() {
                out.set(i, j, fill[j]);
            }
        }
    }
    out
}

fn standardize(train: &mut Matrix, test: &mut Matrix) {
    for j in 0..train.cols() {
        let col = train.column(j);
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for x in [&mut *train, &mut *test] {
            for i in 0..x.rows() {
                x.set(i, j, (x.get(i, j) - m) / sd);
            }
        }
    }
}

fn nearest(train: &Matrix, ytr: &[usize], row: &[f64], cols: &[usize]) -> usize {
    let mut best = f64::INFINITY;
    let mut label = ytr[0];
    for i in 0..train.rows() {
        let r = train.row(i);
        let d: f64 = cols.iter().map(|&j| (r[j] - row[j]) * (r[j] - row[j])).sum();
        if d < best {
            best = d;
            label = ytr[i];
        }
    }
    label
}

fn naive_bayes(train: &Matrix, ytr: &[usize], test: &Matrix, n_classes: usize) -> Vec<usize> {
    let p = train.cols();
    let n = train.rows() as f64;
    let max_var = (0..p)
        .map(|j| {
            let c = train.column(j);
            let m = c.iter().sum::<f64>() / n;
            c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
        })
        .fold(0.0, f64::max);
    let eps = 1e-9 * max_var.max(1e-300);
    let mut params = Vec::with_capacity(n_classes);
    for k in 0..n_classes {
        let rows: Vec<usize> = (0..train.rows()).filter(|&i| ytr[i] == k).collect();
        if rows.is_empty() {
            params.push(None);
            continue;
        }
        let m = rows.len() as f64;
        let stats: Vec<(f64, f64)> = (0..p)
            .map(|j| {
                let mu = rows.iter().map(|&i| train.get(i, j)).sum::<f64>() / m;
                let var = rows.iter().map(|&i| (train.get(i, j) - mu).powi(2)).sum::<f64>() / m;
                (mu, var + eps)
            })
            .collect();
        params.push(Some(((m / n).ln(), stats)));
    }
    (0..test.rows())
        .map(|i| {
            let row = test.row(i);
            let scores: Vec<f64> = params
                .iter()
                .map(|pk| match pk {
                    None => f64::NEG_INFINITY,
                    Some((prior, stats)) => {
                        prior
                            - 0.5
                                * stats
                                    .iter()
                                    .zip(row)
                                    .map(|((mu, var), x)| {
                                        (2.0 * std::f64::consts::PI * var).ln() + (x - mu).powi(2) / var
                                    })
                                    .sum::<f64>()
                    }
                })
                .collect();
            tree::argmax(&scores)
        })
        .collect()
}

fn stump(train: &Matrix, ytr: &[usize], test: &Matrix, n_classes: usize, allowed: Option<Vec<usize>>) -> Vec<usize> {
    let params = TreeParams {
        criterion: Criterion::Entropy,
        max_depth: Some(1),
        allowed_features: allowed,
        ..Default::default()
    };
    let mut r = rng::rng(0, stream::LANDMARK);
    let t = tree::fit_classifier(train, ytr, None, n_classes, (0..train.rows()).collect(), &params, &mut r);
    (0..test.rows()).map(|i| t.predict_class(test.row(i))).collect()
}

/// Attribute with the highest information gain on the training rows.
fn elite_attribute(train: &Matrix, ytr: &[usize], kinds: &[ColumnKind]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, &kind) in kinds.iter().enumerate() {
        let x: Vec<usize> = codes(&train.column(j), kind).into_iter().flatten().collect();
        let g = mutual_information(&x, ytr);
        if g > best.1 {
            best = (j, g);
        }
    }
    best.0
}

fn predict(lm: Landmarker, task: &Task, train_rows: &[usize], test_rows: &[usize]) -> Vec<usize> {
    let mut xtr = imputed(task.x, train_rows, train_rows);
    let mut xte = imputed(task.x, test_rows, train_rows);
    let ytr: Vec<usize> = train_rows.iter().map(|&i| task.y[i]).collect();
    match lm {
        Landmarker::NaiveBayes => naive_bayes(&xtr, &ytr, &xte, task.n_classes),
        Landmarker::OneNn => {
            standardize(&mut xtr, &mut xte);
            let all: Vec<usize> = (0..xtr.cols()).collect();
            (0..xte.rows()).map(|i| nearest(&xtr, &ytr, xte.row(i), &all)).collect()
        }
        Landmarker::EliteNn => {
            let j = elite_attribute(&xtr, &ytr, task.kinds);
            (0..xte.rows()).map(|i| nearest(&xtr, &ytr, xte.row(i), &[j])).collect()
        }
        Landmarker::DecisionNode => stump(&xtr, &ytr, &xte, task.n_classes, None),
        Landmarker::RandomNode => stump(&xtr, &ytr, &xte, task.n_classes, Some(vec![task.random_attr])),
    }
}

/// Mean fold accuracy of every landmarker under stratified CV, or `None`
/// when the data cannot support at least two folds.
fn cv_scores(task: &Task, seed: u64) -> [Option<f64>; 5] {
    let n = task.y.len();
    let mut counts = vec![0usize; task.n_classes];
    for &c in task.y {
        counts[c] += 1;
    }
    let min_count = counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(0);
    let k = FOLDS.min(min_count);
    if n < MIN_INSTANCES || k < 2 {
        return [None; 5];
    }
    let plan = match stratified_kfold_labels(task.y, k, 1, rng::derive_seed(seed, stream::LANDMARK)) {
        Ok(p) => p,
        Err(_) => return [None; 5],
    };
    let mut out = [None; 5];
    for (slot, &lm) in out.iter_mut().zip(&LANDMARKERS) {
        let mut acc = 0.0;
        for (r, f) in plan.splits() {
            let (train, test) = plan.split(r, f);
            let pred = predict(lm, task, &train, &test);
            let hits = pred.iter().zip(&test).filter(|(p, &i)| **p == task.y[i]).count();
            acc += hits as f64 / test.len() as f64;
        }
        *slot = Some(acc / k as f64);
    }
    out
}

/// Half of every class (rounded up), drawn with the subsample stream.
fn stratified_half(y: &[usize], n_classes: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::rng(seed, stream::SUBSAMPLE);
    let mut rows = Vec::new();
    for k in 0..n_classes {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == k).collect();
        idx.shuffle(&mut r);
        idx.truncate(idx.len().div_ceil(2));
        rows.extend(idx);
    }
    rows.sort_unstable();
    rows
}

pub(super) fn extract(ds: &Dataset, seed: u64) -> Entries {
    let x = ds.feature_matrix();
    let kinds: Vec<ColumnKind> = ds.features().iter().map(|c| c.kind()).collect();
    let random_attr = rng::rng(seed, stream::LANDMARK).random_range(0..ds.p());
    let task = Task {
        x: &x,
        y: ds.labels(),
        kinds: &kinds,
        n_classes: ds.c(),
        random_attr,
    };
    let full = cv_scores(&task, seed);

    let rows = stratified_half(ds.labels(), ds.c(), seed);
    let xs = x.select_rows(&rows);
    let ys: Vec<usize> = rows.iter().map(|&i| ds.labels()[i]).collect();
    let sub_task = Task {
        x: &xs,
        y: &ys,
        ..task
    };
    let sub = cv_scores(&sub_task, seed);

    let mut values: Vec<Option<f64>> = full.to_vec();
    for a in 0..5 {
        for b in a + 1..5 {
            values.push(full[a].zip(full[b]).map(|(u, v)| u - v));
        }
    }
    values.extend(sub);
    NAMES.iter().copied().zip(values).collect()
}

#[cfg(test)]
pub(super) fn landmark_scores(ds: &Dataset, seed: u64) -> [Option<f64>; 5] {
    let x = ds.feature_matrix();
    let kinds: Vec<ColumnKind> = ds.features().iter().map(|c| c.kind()).collect();
    let task = Task {
        x: &x,
        y: ds.labels(),
        kinds: &kinds,
        n_classes: ds.c(),
        random_attr: rng::rng(seed, stream::LANDMARK).random_range(0..ds.p()),
    };
    cv_scores(&task, seed)
}
