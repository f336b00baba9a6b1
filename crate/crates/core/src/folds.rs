//! Repeated stratified k-fold resampling plans.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Fold assignment for every instance in every repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    repeats: usize,
    seed: u64,
    assignments: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.assignments.first().map_or(0, Vec::len)
    }

    /// Fold index of each instance for one repeat.
    pub fn assignment(&self, repeat: usize) -> &[usize] {
        &self.assignments[repeat]
    }

    /// `(train, test)` instance indices, each in ascending order.
    pub fn split(&self, repeat: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments[repeat].iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    /// All `(repeat, fold)` pairs in evaluation order.
    pub fn splits(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.repeats).flat_map(move |r| (0..self.k).map(move |f| (r, f)))
    }
}

/// Builds a stratified plan over `labels` (dense class indices).
///
/// Within each class the instances are shuffled and dealt round-robin;
/// the dealing position carries over from one class to the next so fold
/// sizes stay balanced as well. Each fold therefore receives either
/// `floor(n_c / k)` or `ceil(n_c / k)` instances of class `c`.
pub fn stratified_kfold_labels(
    labels: &[usize],
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let c = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
                k,
            });
        }
    }

    let mut assignments = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = rng::rng(seed, rng::stream::FOLDS ^ ((r as u64) << 8));
        let mut fold_of = vec![0usize; n];
        let mut pos = 0usize;
        for members in &by_class {
            let mut shuffled = members.clone();
            shuffled.shuffle(&mut rng);
            for i in shuffled {
                fold_of[i] = pos % k;
                pos += 1;
            }
        }
        assignments.push(fold_of);
    }
    Ok(FoldPlan {
        k,
        repeats,
        seed,
        assignments,
    })
}

pub fn stratified_kfold(
    ds: &crate::dataset::Dataset,
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<FoldPlan> {
    stratified_kfold_labels(ds.labels(), k, repeats, seed)
}
