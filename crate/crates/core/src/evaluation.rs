//! Repeated stratified cross-validation of a pipeline and the four
//! performance measures (accuracy and macro precision / recall / F1).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alloc;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::folds::FoldPlan;
use crate::learners::{self, Classifier, HpConfig};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::F1];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric `{s}`")))
    }
}

/// One confusion matrix worth of scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Some per-class ratio had a zero denominator and was counted as 0.
    pub undefined: bool,
}

impl Metrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
        }
    }
}

/// Scores a `c x c` confusion matrix (`rows = truth`, `cols = predicted`).
/// Macro averages run over classes that occur in the truth or the
/// predictions.
pub fn compute_metrics(confusion: &[Vec<usize>]) -> Result<Metrics> {
    let c = confusion.len();
    let total: usize = confusion.iter().flatten().sum();
    if c == 0 || total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let trace: usize = (0..c).map(|i| confusion[i][i]).sum();
    let mut undefined = false;
    let ratio = |num: usize, den: usize, flag: &mut bool| {
        if den == 0 {
            *flag = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let (mut p, mut r, mut f, mut k) = (0.0, 0.0, 0.0, 0usize);
    for i in 0..c {
        let row: usize = confusion[i].iter().sum();
        let col: usize = confusion.iter().map(|x| x[i]).sum();
        if row == 0 && col == 0 {
            continue;
        }
        let tp = confusion[i][i];
        let pi = ratio(tp, col, &mut undefined);
        let ri = ratio(tp, row, &mut undefined);
        let fi = if pi + ri > 0.0 {
            2.0 * pi * ri / (pi + ri)
        } else {
            undefined = true;
            0.0
        };
        p += pi;
        r += ri;
        f += fi;
        k += 1;
    }
    let k = k as f64;
    Ok(Metrics {
        accuracy: trace as f64 / total as f64,
        precision: p / k,
        recall: r / k,
        f1: f / k,
        undefined,
    })
}

pub fn confusion_matrix(truth: &[usize], pred: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        m[t][p] += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub folds: Vec<f64>,
}

/// Compensated (Neumaier) summation, so identical fold scores average to
/// exactly themselves.
pub fn accurate_sum(v: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in v {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl MetricScore {
    pub fn from_folds(folds: Vec<f64>) -> Self {
        let n = folds.len() as f64;
        let mean = accurate_sum(&folds) / n;
        let std = (folds.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        Self { mean, std, folds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub metrics: BTreeMap<Metric, MetricScore>,
    /// Folds in which some macro ratio was undefined.
    pub undefined_folds: usize,
    pub runtime_secs: f64,
    /// Heap high-water mark above the starting level, when tracked.
    pub peak_memory_bytes: Option<u64>,
}

impl ScoreSet {
    pub fn mean(&self, m: Metric) -> f64 {
        self.metrics[&m].mean
    }

    pub fn score(&self, m: Metric) -> &MetricScore {
        &self.metrics[&m]
    }

    pub fn fold_count(&self) -> usize {
        self.metrics.values().next().map_or(0, |s| s.folds.len())
    }
}

/// Cross-validates an arbitrary fit function. `on_fit` sees every fitted
/// model before it scores its test fold. Folds run in plan order.
pub fn cross_validate<C, F, O>(ds: &Dataset, plan: &FoldPlan, mut fit_fn: F, mut on_fit: O) -> Result<ScoreSet>
where
    C: Classifier,
    F: FnMut(&Matrix, &[usize], usize) -> Result<C>,
    O: FnMut(usize, usize, &C),
{
    if plan.n() != ds.n() {
        return Err(Error::InvalidConfig(format!(
            "fold plan covers {} instances, dataset has {}",
            plan.n(),
            ds.n()
        )));
    }
    let start = Instant::now();
    let x = ds.feature_matrix();
    let y = ds.labels();
    let c = ds.c();
    let (folds, peak) = alloc::measure(|| -> Result<Vec<Metrics>> {
        let mut out = Vec::new();
        for (r, f) in plan.splits() {
            let (train, test) = plan.split(r, f);
            let xtr = x.select_rows(&train);
            let ytr: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let model = fit_fn(&xtr, &ytr, c).map_err(|e| Error::FoldFit {
                repeat: r,
                fold: f,
                source: Box::new(e),
            })?;
            on_fit(r, f, &model);
            let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
            let pred: Vec<usize> = test.iter().map(|&i| model.predict_row(x.row(i))).collect();
            out.push(compute_metrics(&confusion_matrix(&truth, &pred, c))?);
        }
        Ok(out)
    });
    let folds = folds?;
    let metrics = Metric::ALL
        .into_iter()
        .map(|m| (m, MetricScore::from_folds(folds.iter().map(|s| s.get(m)).collect())))
        .collect();
    Ok(ScoreSet {
        metrics,
        undefined_folds: folds.iter().filter(|m| m.undefined).count(),
        runtime_secs: start.elapsed().as_secs_f64(),
        peak_memory_bytes: peak,
    })
}

/// Scores `cfg` on `ds` under `plan`.
pub fn evaluate_pipeline(cfg: &HpConfig, ds: &Dataset, plan: &FoldPlan) -> Result<ScoreSet> {
    cfg.validate()?;
    cross_validate(ds, plan, |x, y, c| learners::fit(cfg, x, y, c), |_, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::folds::stratified_kfold;
    use crate::learners::MajorityClass;

    #[test]
    fn binary_accuracy() {
        // TP=3, TN=4, FP=2, FN=1 with class 1 positive
        let m = compute_metrics(&[vec![4, 2], vec![1, 3]]).unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-15);
    }

    #[test]
    fn perfect_diagonal_scores_one() {
        let m = compute_metrics(&[vec![3, 0, 0], vec![0, 2, 0], vec![0, 0, 9]]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        assert!(!m.undefined);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert!(matches!(compute_metrics(&[vec![0, 0], vec![0, 0]]), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn never_predicted_class_flags_undefined_precision() {
        let m = compute_metrics(&[vec![5, 0, 0], vec![0, 0, 5], vec![0, 0, 5]]).unwrap();
        assert!(m.undefined);
        assert!((m.precision - 0.5).abs() < 1e-15);
    }

    #[test]
    fn majority_baseline_matches_base_rate_on_even_folds() {
        let labels: Vec<usize> = (0..50).map(|i| usize::from(i >= 35)).collect();
        let x = Matrix::zeros(50, 1);
        let ds = Dataset::from_numeric("m", &x, &labels).unwrap();
        let plan = stratified_kfold(&ds, 5, 2, 1).unwrap();
        let s = cross_validate(&ds, &plan, |x, y, c| Ok(MajorityClass::fit(x, y, c)), |_, _, _| {}).unwrap();
        assert_eq!(s.fold_count(), 10);
        assert!(s.score(Metric::Accuracy).folds.iter().all(|&a| a == 0.7));
        assert_eq!(s.mean(Metric::Accuracy), 0.7);
        assert_eq!(s.undefined_folds, 10);
    }

    #[test]
    fn plan_size_must_match() {
        let x = Matrix::zeros(10, 1);
        let ds = Dataset::from_numeric("m", &x, &[0, 1, 0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
        let other = Dataset::from_numeric("o", &Matrix::zeros(12, 1), &[0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
        let plan = stratified_kfold(&other, 2, 1, 0).unwrap();
        assert!(cross_validate(&ds, &plan, |x, y, c| Ok(MajorityClass::fit(x, y, c)), |_, _, _| {}).is_err());
    }
}
