use nalgebra::{DMatrix, SymmetricEigen};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::stats::{self, extreme_classes, mean, mean_defined, numeric_columns, variance};
use super::Entries;
use crate::dataset::Dataset;

pub(super) const NAMES: &[&str] = &[
    "skewness_mean",
    "kurtosis_mean",
    "cor_mean",
    "cov_mean",
    "sparsity",
    "gravity",
    "eigenvalue_max",
    "anova_pvalue_mean",
    "geometric_mean",
    "harmonic_mean",
    "nr_degenerate_attr",
    "nr_shifted_attr",
];

/// Values present in both columns, as aligned pairs.
fn paired(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_nan() && !y.is_nan())
        .map(|(x, y)| (*x, *y))
        .unzip()
}

fn sample_cov(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    Some(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (vx, vy) = (variance(x), variance(y));
    if x.is_empty() || vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64;
    Some((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// One-way ANOVA p-value of `values` grouped by `groups`.
pub fn anova_pvalue(values: &[f64], groups: &[usize], n_groups: usize) -> Option<f64> {
    let mut sums = vec![0.0; n_groups];
    let mut counts = vec![0usize; n_groups];
    for (&v, &g) in values.iter().zip(groups) {
        sums[g] += v;
        counts[g] += 1;
    }
    let k = counts.iter().filter(|&&c| c > 0).count();
    let n = values.len();
    if k < 2 || n <= k {
        return None;
    }
    let grand = mean(values);
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let between: f64 = means
        .iter()
        .zip(&counts)
        .map(|(m, &c)| c as f64 * (m - grand) * (m - grand))
        .sum();
    let within: f64 = values
        .iter()
        .zip(groups)
        .map(|(v, &g)| (v - means[g]) * (v - means[g]))
        .sum();
    let (d1, d2) = ((k - 1) as f64, (n - k) as f64);
    if within <= 0.0 {
        return (between > 0.0).then_some(0.0);
    }
    let f = (between / d1) / (within / d2);
    let dist = FisherSnedecor::new(d1, d2).ok()?;
    Some(dist.sf(f))
}

/// Geometric and harmonic means of one attribute, shifting by `1 - min`
/// when nonpositive values occur. Returns `(geo, harm, shifted)`.
pub fn positive_means(v: &[f64]) -> (f64, f64, bool) {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min <= 0.0 { 1.0 - min } else { 0.0 };
    let n = v.len() as f64;
    let geo = (v.iter().map(|x| (x + shift).ln()).sum::<f64>() / n).exp();
    let harm = n / v.iter().map(|x| 1.0 / (x + shift)).sum::<f64>();
    (geo, harm, shift > 0.0)
}

pub(super) fn extract(ds: &Dataset) -> Entries {
    let numeric = numeric_columns(ds);
    if numeric.is_empty() {
        return NAMES.iter().map(|&n| (n, None)).collect();
    }
    let cols: Vec<&[f64]> = numeric.iter().map(|&j| ds.features()[j].values()).collect();
    let present: Vec<Vec<f64>> = numeric.iter().map(|&j| ds.features()[j].present()).collect();
    let degenerate: Vec<bool> = present
        .iter()
        .map(|v| v.len() < 2 || variance(v) <= 0.0)
        .collect();
    let live: Vec<usize> = (0..numeric.len()).filter(|&i| !degenerate[i]).collect();

    let skew = mean_defined(live.iter().map(|&i| stats::skewness(&present[i])));
    let kurt = mean_defined(live.iter().map(|&i| stats::kurtosis(&present[i])));

    let mut cors = Vec::new();
    for (a, &i) in live.iter().enumerate() {
        for &j in &live[a + 1..] {
            let (x, y) = paired(cols[i], cols[j]);
            cors.push(pearson(&x, &y).map(f64::abs));
        }
    }
    let cor = mean_defined(cors);

    let mut covs = Vec::new();
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            let (x, y) = paired(cols[i], cols[j]);
            covs.push(sample_cov(&x, &y).map(f64::abs));
        }
    }
    let cov = mean_defined(covs);

    let n = ds.n() as f64;
    let sparsity = mean_defined(present.iter().map(|v| {
        let mut s = stats::sorted(v);
        s.dedup();
        Some(1.0 - s.len() as f64 / n)
    }));

    let labels = ds.labels();
    let (maj, min) = extreme_classes(&ds.class_counts());
    let mut d2 = 0.0;
    let mut used = 0;
    for &i in &live {
        let (mu, sd) = (mean(&present[i]), stats::std_dev(&present[i]));
        let centroid = |class: usize| {
            let v: Vec<f64> = cols[i]
                .iter()
                .zip(labels)
                .filter(|(x, &l)| l == class && !x.is_nan())
                .map(|(x, _)| (x - mu) / sd)
                .collect();
            (!v.is_empty()).then(|| mean(&v))
        };
        if let (Some(a), Some(b)) = (centroid(maj), centroid(min)) {
            d2 += (a - b) * (a - b);
            used += 1;
        }
    }
    let gravity = (used > 0).then(|| d2.sqrt());

    let eigen = eigenvalue_max(ds, &numeric);

    let anova = mean_defined(live.iter().map(|&i| {
        let (v, g): (Vec<f64>, Vec<usize>) = cols[i]
            .iter()
            .zip(labels)
            .filter(|(x, _)| !x.is_nan())
            .map(|(x, &l)| (*x, l))
            .unzip();
        anova_pvalue(&v, &g, ds.c())
    }));

    let means: Vec<(f64, f64, bool)> = present
        .iter()
        .filter(|v| !v.is_empty())
        .map(|v| positive_means(v))
        .collect();
    let geo = mean_defined(means.iter().map(|m| Some(m.0)));
    let harm = mean_defined(means.iter().map(|m| Some(m.1)));
    let shifted = means.iter().filter(|m| m.2).count() as f64;

    vec![
        ("skewness_mean", skew),
        ("kurtosis_mean", kurt),
        ("cor_mean", cor),
        ("cov_mean", cov),
        ("sparsity", sparsity),
        ("gravity", gravity),
        ("eigenvalue_max", eigen),
        ("anova_pvalue_mean", anova),
        ("geometric_mean", geo),
        ("harmonic_mean", harm),
        ("nr_degenerate_attr", Some(degenerate.iter().filter(|&&d| d).count() as f64)),
        ("nr_shifted_attr", Some(shifted)),
    ]
}

/// Largest eigenvalue of the sample covariance of the mean-imputed numeric
/// attributes.
fn eigenvalue_max(ds: &Dataset, numeric: &[usize]) -> Option<f64> {
    let n = ds.n();
    if n < 2 {
        return None;
    }
    let x = stats::mean_imputed(ds).select_cols(numeric);
    let p = x.cols();
    let means: Vec<f64> = (0..p).map(|j| mean(&x.column(j))).collect();
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let s: f64 = (0..n)
                .map(|i| (x.get(i, a) - means[a]) * (x.get(i, b) - means[b]))
                .sum::<f64>()
                / (n - 1) as f64;
            cov[(a, b)] = s;
            cov[(b, a)] = s;
        }
    }
    let eig = SymmetricEigen::new(cov);
    eig.eigenvalues.iter().copied().reduce(f64::max)
}
