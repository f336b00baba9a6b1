use super::stats::{mean, mean_imputed, std_dev};
use super::Entries;
use crate::dataset::Dataset;
use crate::learners::tree::{self, argmax, Criterion, Node, Tree, TreeParams};
use crate::rng::{self, stream};

pub(super) const NAMES: &[&str] = &[
    "tree_nodes",
    "tree_leaves",
    "tree_height",
    "tree_width",
    "nodes_per_level_mean",
    "branch_len_max",
    "branch_len_min",
    "branch_len_mean",
    "branch_len_sd",
    "leaves_per_class_min",
    "leaves_per_class_max",
    "leaves_agreement_mean",
    "attr_occurrence_min",
    "attr_occurrence_max",
    "attr_occurrence_mean",
    "attr_occurrence_sd",
    "info_gain_mean",
];

pub const MIN_INSTANCES: usize = 10;

/// The unpruned entropy tree the model-based measures describe.
pub fn characterization_tree(ds: &Dataset, seed: u64) -> Tree {
    let x = mean_imputed(ds);
    let params = TreeParams {
        criterion: Criterion::Entropy,
        ..Default::default()
    };
    let mut r = rng::rng(seed, stream::MODEL_TREE);
    tree::fit_classifier(&x, ds.labels(), None, ds.c(), (0..ds.n()).collect(), &params, &mut r)
}

/// Measures of a fitted tree over `p` attributes and `c` classes.
pub fn describe(t: &Tree, p: usize, c: usize) -> Entries {
    let depths = t.depths();
    let height = depths.iter().copied().max().unwrap_or(0);
    let mut per_level = vec![0usize; height + 1];
    for &d in &depths {
        per_level[d] += 1;
    }
    let mut branch = Vec::new();
    let mut leaves_of_class = vec![0usize; c];
    let mut agreement = Vec::new();
    let mut occurrence = vec![0.0; p];
    let mut gains = Vec::new();
    for (node, &d) in t.nodes.iter().zip(&depths) {
        match node {
            Node::Leaf { value, .. } => {
                branch.push(d as f64);
                leaves_of_class[argmax(value)] += 1;
                agreement.push(value.iter().copied().fold(0.0, f64::max));
            }
            Node::Split { feature, gain, .. } => {
                occurrence[*feature] += 1.0;
                gains.push(*gain);
            }
        }
    }
    let leaves = branch.len() as f64;
    let per_class: Vec<f64> = leaves_of_class.iter().map(|&k| k as f64 / leaves).collect();
    let fmin = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    vec![
        ("tree_nodes", Some(t.nodes.len() as f64)),
        ("tree_leaves", Some(leaves)),
        ("tree_height", Some(height as f64)),
        ("tree_width", Some(*per_level.iter().max().unwrap() as f64)),
        ("nodes_per_level_mean", Some(t.nodes.len() as f64 / (height + 1) as f64)),
        ("branch_len_max", Some(fmax(&branch))),
        ("branch_len_min", Some(fmin(&branch))),
        ("branch_len_mean", Some(mean(&branch))),
        ("branch_len_sd", Some(std_dev(&branch))),
        ("leaves_per_class_min", Some(fmin(&per_class))),
        ("leaves_per_class_max", Some(fmax(&per_class))),
        ("leaves_agreement_mean", Some(mean(&agreement))),
        ("attr_occurrence_min", Some(fmin(&occurrence))),
        ("attr_occurrence_max", Some(fmax(&occurrence))),
        ("attr_occurrence_mean", Some(mean(&occurrence))),
        ("attr_occurrence_sd", Some(std_dev(&occurrence))),
        ("info_gain_mean", (!gains.is_empty()).then(|| mean(&gains))),
    ]
}

pub(super) fn extract(ds: &Dataset, seed: u64) -> Entries {
    if ds.n() < MIN_INSTANCES {
        return NAMES.iter().map(|&n| (n, None)).collect();
    }
    describe(&characterization_tree(ds, seed), ds.p(), ds.c())
}
