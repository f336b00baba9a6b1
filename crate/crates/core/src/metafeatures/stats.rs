//! Small descriptive-statistics helpers shared by the extractors.

use crate::dataset::{ColumnKind, Dataset};
use crate::matrix::Matrix;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    variance(v).sqrt()
}

/// Central moment of order `k`.
pub fn central_moment(v: &[f64], k: i32) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(k)).sum::<f64>() / v.len() as f64
}

/// Sample skewness `m3 / m2^1.5`; `None` for constant input.
pub fn skewness(v: &[f64]) -> Option<f64> {
    let m2 = central_moment(v, 2);
    (m2 > 0.0).then(|| central_moment(v, 3) / m2.powf(1.5))
}

/// Excess kurtosis `m4 / m2^2 - 3`; `None` for constant input.
pub fn kurtosis(v: &[f64]) -> Option<f64> {
    let m2 = central_moment(v, 2);
    (m2 > 0.0).then(|| central_moment(v, 4) / (m2 * m2) - 3.0)
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Mean of the `Some` entries, `None` if there are none.
pub fn mean_defined(v: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = v.into_iter().flatten().collect();
    (!vals.is_empty()).then(|| mean(&vals))
}

pub fn numeric_columns(ds: &Dataset) -> Vec<usize> {
    ds.features()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind() == ColumnKind::Numeric)
        .map(|(j, _)| j)
        .collect()
}

/// Feature matrix with every missing cell replaced by its column mean
/// (0 when the whole column is missing).
pub fn mean_imputed(ds: &Dataset) -> Matrix {
    let mut x = ds.feature_matrix();
    for j in 0..x.cols() {
        let present: Vec<f64> = x.column(j).into_iter().filter(|v| !v.is_nan()).collect();
        let fill = if present.is_empty() { 0.0 } else { mean(&present) };
        for i in 0..x.rows() {
            if x.get(i, j).is_nan() {
                x.set(i, j, fill);
            }
        }
    }
    x
}

/// `(majority, minority)` class indices, distinct; ties go to the lowest
/// index.
pub fn extreme_classes(counts: &[usize]) -> (usize, usize) {
    let mut maj = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[maj] {
            maj = i;
        }
    }
    let mut min = usize::from(maj == 0);
    for (i, &c) in counts.iter().enumerate() {
        if i != maj && c < counts[min] {
            min = i;
        }
    }
    (maj, min)
}
