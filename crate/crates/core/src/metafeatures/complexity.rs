use nalgebra::{DMatrix, SymmetricEigen};

use super::info::entropy_bits;
use super::stats::{mean, mean_imputed, numeric_columns, variance};
use super::Entries;
use crate::dataset::Dataset;

pub(super) const NAMES: &[&str] = &[
    "fisher_ratio_max",
    "overlap_volume",
    "class_prop_entropy",
    "imbalance_ratio",
    "points_per_dim",
    "pca_dim_ratio",
];

/// Share of variance the retained principal components must explain.
pub const PCA_VARIANCE: f64 = 0.95;

/// `(mu1 - mu2)^2 / (var1 + var2)` with population variances; `None` when
/// the denominator vanishes.
pub fn fisher_ratio(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let den = variance(a) + variance(b);
    let d = mean(a) - mean(b);
    (den > 0.0).then(|| d * d / den)
}

/// Length of the intersection of the two value ranges over the length of
/// their union; 1 when both are the same single point.
pub fn range_overlap(a: &[f64], b: &[f64]) -> f64 {
    let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let union = hi(a).max(hi(b)) - lo(a).min(lo(b));
    let inter = hi(a).min(hi(b)) - lo(a).max(lo(b));
    if union <= 0.0 {
        1.0
    } else {
        (inter / union).max(0.0)
    }
}

fn by_class(ds: &Dataset, j: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); ds.c()];
    for (&v, &l) in ds.features()[j].values().iter().zip(ds.labels()) {
        if !v.is_nan() {
            out[l].push(v);
        }
    }
    out
}

pub(super) fn extract(ds: &Dataset) -> Entries {
    let numeric = numeric_columns(ds);
    let grouped: Vec<Vec<Vec<f64>>> = numeric.iter().map(|&j| by_class(ds, j)).collect();
    let c = ds.c();

    let mut fisher: Option<f64> = None;
    let mut overlap: Option<f64> = None;
    for c1 in 0..c {
        for c2 in c1 + 1..c {
            let mut volume = 1.0;
            let mut any = false;
            for g in &grouped {
                if let Some(f) = fisher_ratio(&g[c1], &g[c2]) {
                    fisher = Some(fisher.map_or(f, |m| m.max(f)));
                }
                if !g[c1].is_empty() && !g[c2].is_empty() {
                    volume *= range_overlap(&g[c1], &g[c2]);
                    any = true;
                }
            }
            if any {
                overlap = Some(overlap.map_or(volume, |m: f64| m.min(volume)));
            }
        }
    }

    let counts = ds.class_counts();
    let max = *counts.iter().max().unwrap() as f64;
    let min = *counts.iter().min().unwrap() as f64;
    vec![
        ("fisher_ratio_max", fisher),
        ("overlap_volume", overlap),
        ("class_prop_entropy", Some(entropy_bits(&counts))),
        ("imbalance_ratio", Some(max / min)),
        ("points_per_dim", Some(ds.n() as f64 / ds.p() as f64)),
        ("pca_dim_ratio", pca_dimension(ds).map(|m| m as f64 / ds.p() as f64)),
    ]
}

/// Principal components needed to explain `PCA_VARIANCE` of the
/// standardized, mean-imputed design (constant attributes dropped).
pub fn pca_dimension(ds: &Dataset) -> Option<usize> {
    let x = mean_imputed(ds);
    let n = x.rows();
    if n < 2 {
        return None;
    }
    let cols: Vec<Vec<f64>> = (0..x.cols())
        .map(|j| x.column(j))
        .filter(|c| variance(c) > 0.0)
        .map(|c| {
            let (m, sd) = (mean(&c), variance(&c).sqrt());
            c.iter().map(|v| (v - m) / sd).collect()
        })
        .collect();
    let p = cols.len();
    if p == 0 {
        return None;
    }
    let mut corr = DMatrix::<f64>::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let s = cols[a].iter().zip(&cols[b]).map(|(u, v)| u * v).sum::<f64>() / n as f64;
            corr[(a, b)] = s;
            corr[(b, a)] = s;
        }
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(corr)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0))
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = eig.iter().sum();
    let mut acc = 0.0;
    for (i, v) in eig.iter().enumerate() {
        acc += v;
        if acc >= PCA_VARIANCE * total - 1e-12 {
            return Some(i + 1);
        }
    }
    Some(p)
}
