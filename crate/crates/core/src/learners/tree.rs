//! CART decision trees: classification (gini / entropy, weighted) and
//! regression (squared error / Friedman improvement) with optional
//! feature subsampling and randomized thresholds.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng::EngineRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
    Mse,
    FriedmanMse,
}

impl Criterion {
    fn is_classification(self) -> bool {
        matches!(self, Criterion::Gini | Criterion::Entropy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitter {
    Best,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub splitter: Splitter,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features examined per node; `None` examines all.
    pub max_features: Option<f64>,
    /// Restricts splitting to these feature indices.
    pub allowed_features: Option<Vec<usize>>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            splitter: Splitter::Best,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            allowed_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Impurity decrease of this split relative to the node.
        gain: f64,
        samples: usize,
    },
    Leaf {
        /// Class distribution (classification) or `[value]` (regression).
        value: Vec<f64>,
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

impl Tree {
    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Class index with the largest leaf share; ties go to the lowest index.
    pub fn predict_class(&self, row: &[f64]) -> usize {
        argmax(self.leaf_value(row))
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Depth of every node (root = 0), indexed like `nodes`.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.nodes.len()];
        for i in 0..self.nodes.len() {
            if let Node::Split { left, right, .. } = self.nodes[i] {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
            }
        }
        depth
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// What the tree is fitted against.
enum Target<'a> {
    Class {
        y: &'a [usize],
        weights: Option<&'a [f64]>,
        n_classes: usize,
    },
    Reg {
        y: &'a [f64],
    },
}

impl Target<'_> {
    fn stats_len(&self) -> usize {
        match self {
            Target::Class { n_classes, .. } => *n_classes,
            // [weight, sum, sum of squares]
            Target::Reg { .. } => 3,
        }
    }

    #[inline]
    fn add(&self, stats: &mut [f64], row: usize, sign: f64) {
        match self {
            Target::Class { y, weights, .. } => {
                let w = weights.map_or(1.0, |w| w[row]);
                stats[y[row]] += sign * w;
            }
            Target::Reg { y } => {
                let v = y[row];
                stats[0] += sign;
                stats[1] += sign * v;
                stats[2] += sign * v * v;
            }
        }
    }

    fn weight(&self, stats: &[f64]) -> f64 {
        match self {
            Target::Class { .. } => stats.iter().sum(),
            Target::Reg { .. } => stats[0],
        }
    }
}

fn impurity(criterion: Criterion, stats: &[f64]) -> f64 {
    match criterion {
        Criterion::Gini => {
            let w: f64 = stats.iter().sum();
            if w <= 0.0 {
                return 0.0;
            }
            1.0 - stats.iter().map(|c| (c / w) * (c / w)).sum::<f64>()
        }
        Criterion::Entropy => {
            let w: f64 = stats.iter().sum();
            if w <= 0.0 {
                return 0.0;
            }
            -stats
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|c| {
                    let q = c / w;
                    q * q.log2()
                })
                .sum::<f64>()
        }
        Criterion::Mse | Criterion::FriedmanMse => {
            let w = stats[0];
            if w <= 0.0 {
                return 0.0;
            }
            let mean = stats[1] / w;
            (stats[2] / w - mean * mean).max(0.0)
        }
    }
}

/// Split quality; larger is better.
fn split_gain(criterion: Criterion, parent: &[f64], left: &[f64], right: &[f64], target: &Target) -> f64 {
    let w = target.weight(parent);
    let wl = target.weight(left);
    let wr = target.weight(right);
    match criterion {
        Criterion::FriedmanMse => {
            let diff = left[1] / wl - right[1] / wr;
            wl * wr * diff * diff / (w * w)
        }
        _ => {
            impurity(criterion, parent)
                - (wl / w) * impurity(criterion, left)
                - (wr / w) * impurity(criterion, right)
        }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    target: Target<'a>,
    params: &'a TreeParams,
    leaf_fn: Option<&'a dyn Fn(&[usize]) -> f64>,
    features: Vec<usize>,
    n_visit: usize,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn build(&mut self, rows: Vec<usize>, rng: &mut EngineRng) {
        // explicit stack of (node slot, rows, depth)
        self.nodes.push(Node::Leaf {
            value: Vec::new(),
            samples: 0,
        });
        let mut stack = vec![(0usize, rows, 0usize)];
        while let Some((slot, rows, depth)) = stack.pop() {
            let mut stats = vec![0.0; self.target.stats_len()];
            for &r in &rows {
                self.target.add(&mut stats, r, 1.0);
            }
            let m = rows.len();
            let node_imp = impurity(self.params.criterion, &stats);
            let can_split = m >= self.params.min_samples_split
                && m >= 2 * self.params.min_samples_leaf
                && self.params.max_depth.is_none_or(|d| depth < d)
                && node_imp > 1e-12;
            let best = if can_split {
                self.best_split(&rows, &stats, rng)
            } else {
                None
            };
            match best {
                None => self.nodes[slot] = self.leaf(&rows, &stats),
                Some(c) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = rows
                        .iter()
                        .partition(|&&i| self.x.get(i, c.feature) <= c.threshold);
                    let left = self.nodes.len();
                    let right = left + 1;
                    for _ in 0..2 {
                        self.nodes.push(Node::Leaf {
                            value: Vec::new(),
                            samples: 0,
                        });
                    }
                    self.nodes[slot] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                        gain: c.gain,
                        samples: m,
                    };
                    // right pushed first so the left subtree is expanded first
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
    }

    fn leaf(&self, rows: &[usize], stats: &[f64]) -> Node {
        let value = match (&self.target, self.leaf_fn) {
            (Target::Class { .. }, _) => {
                let w: f64 = stats.iter().sum();
                if w > 0.0 {
                    stats.iter().map(|c| c / w).collect()
                } else {
                    let k = stats.len() as f64;
                    vec![1.0 / k; stats.len()]
                }
            }
            (Target::Reg { .. }, Some(f)) => vec![f(rows)],
            (Target::Reg { .. }, None) => {
                vec![if stats[0] > 0.0 { stats[1] / stats[0] } else { 0.0 }]
            }
        };
        Node::Leaf {
            value,
            samples: rows.len(),
        }
    }

    fn best_split(&mut self, rows: &[usize], parent: &[f64], rng: &mut EngineRng) -> Option<Candidate> {
        let mut order = self.features.clone();
        if self.n_visit < order.len() {
            order.shuffle(rng);
        }
        let min_leaf = self.params.min_samples_leaf;
        let m = rows.len();
        let mut best: Option<Candidate> = None;
        let mut visited = 0;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(m);
        let mut left = vec![0.0; parent.len()];
        let mut right = vec![0.0; parent.len()];

        for &f in &order {
            if visited >= self.n_visit {
                break;
            }
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.x.get(r, f), r)));
            let (lo, hi) = pairs
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(v, _)| (a.min(v), b.max(v)));
            if lo >= hi {
                continue;
            }
            visited += 1;

            match self.params.splitter {
                Splitter::Best => {
                    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    left.iter_mut().for_each(|v| *v = 0.0);
                    for i in 1..m {
                        self.target.add(&mut left, pairs[i - 1].1, 1.0);
                        if pairs[i].0 <= pairs[i - 1].0 || i < min_leaf || m - i < min_leaf {
                            continue;
                        }
                        for (r, (p, l)) in right.iter_mut().zip(parent.iter().zip(&left)) {
                            *r = p - l;
                        }
                        let gain = split_gain(self.params.criterion, parent, &left, &right, &self.target);
                        if best.as_ref().is_none_or(|b| gain > b.gain) {
                            let (a, b) = (pairs[i - 1].0, pairs[i].0);
                            let mut t = a + (b - a) / 2.0;
                            if t >= b {
                                t = a;
                            }
                            best = Some(Candidate {
                                feature: f,
                                threshold: t,
                                gain,
                            });
                        }
                    }
                }
                Splitter::Random => {
                    let t = rng.random_range(lo..hi);
                    left.iter_mut().for_each(|v| *v = 0.0);
                    let mut n_left = 0;
                    for &(v, r) in &pairs {
                        if v <= t {
                            self.target.add(&mut left, r, 1.0);
                            n_left += 1;
                        }
                    }
                    if n_left < min_leaf || m - n_left < min_leaf {
                        continue;
                    }
                    for (r, (p, l)) in right.iter_mut().zip(parent.iter().zip(&left)) {
                        *r = p - l;
                    }
                    let gain = split_gain(self.params.criterion, parent, &left, &right, &self.target);
                    if best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(Candidate {
                            feature: f,
                            threshold: t,
                            gain,
                        });
                    }
                }
            }
        }
        best
    }
}

fn feature_plan(params: &TreeParams, n_features: usize) -> (Vec<usize>, usize) {
    let features: Vec<usize> = params
        .allowed_features
        .clone()
        .unwrap_or_else(|| (0..n_features).collect());
    let n_visit = match params.max_features {
        None => features.len(),
        Some(frac) => ((frac * features.len() as f64) as usize).clamp(1, features.len().max(1)),
    };
    (features, n_visit)
}

/// Fits a classification tree on `rows` (duplicates allowed, as produced by
/// bootstrapping). Rows must not contain missing values.
pub fn fit_classifier(
    x: &Matrix,
    y: &[usize],
    weights: Option<&[f64]>,
    n_classes: usize,
    rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut EngineRng,
) -> Tree {
    assert!(params.criterion.is_classification());
    let (features, n_visit) = feature_plan(params, x.cols());
    let mut b = Builder {
        x,
        target: Target::Class {
            y,
            weights,
            n_classes,
        },
        params,
        leaf_fn: None,
        features,
        n_visit,
        nodes: Vec::new(),
    };
    b.build(rows, rng);
    Tree {
        nodes: b.nodes,
        n_features: x.cols(),
    }
}

/// Fits a regression tree; `leaf_fn` computes each leaf's output from its
/// rows (mean of `y` when absent).
pub fn fit_regressor(
    x: &Matrix,
    y: &[f64],
    rows: Vec<usize>,
    params: &TreeParams,
    leaf_fn: Option<&dyn Fn(&[usize]) -> f64>,
    rng: &mut EngineRng,
) -> Tree {
    assert!(!params.criterion.is_classification());
    let (features, n_visit) = feature_plan(params, x.cols());
    let mut b = Builder {
        x,
        target: Target::Reg { y },
        params,
        leaf_fn,
        features,
        n_visit,
        nodes: Vec::new(),
    };
    b.build(rows, rng);
    Tree {
        nodes: b.nodes,
        n_features: x.cols(),
    }
}
