use super::stats::{numeric_columns, quantile, sorted};
use super::Entries;
use crate::dataset::{ColumnKind, Dataset};

pub(super) const NAMES: &[&str] = &[
    "nr_inst",
    "nr_attr",
    "nr_class",
    "nr_missing",
    "nr_outliers",
    "attr_to_inst",
    "inst_to_attr",
    "freq_class_min",
    "freq_class_max",
    "prop_binary_attr",
    "prop_nominal_attr",
    "prop_numeric_attr",
    "prop_inst_missing",
    "prop_missing_values",
];

/// Values outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`, summed over numeric attributes.
pub(super) fn outlier_count(ds: &Dataset) -> usize {
    numeric_columns(ds)
        .into_iter()
        .map(|j| {
            let v = ds.features()[j].present();
            if v.is_empty() {
                return 0;
            }
            let s = sorted(&v);
            let (q1, q3) = (quantile(&s, 0.25), quantile(&s, 0.75));
            let iqr = q3 - q1;
            let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
            v.iter().filter(|&&x| x < lo || x > hi).count()
        })
        .sum()
}

pub(super) fn extract(ds: &Dataset) -> Entries {
    let n = ds.n() as f64;
    let p = ds.p() as f64;
    let counts = ds.class_counts();
    let kind_share = |k: ColumnKind| ds.features().iter().filter(|c| c.kind() == k).count() as f64 / p;
    let min = *counts.iter().min().unwrap() as f64;
    let max = *counts.iter().max().unwrap() as f64;
    let missing = ds.missing_count() as f64;
    let values = [
        n,
        p,
        ds.c() as f64,
        missing,
        outlier_count(ds) as f64,
        p / n,
        n / p,
        min / n,
        max / n,
        kind_share(ColumnKind::Binary),
        kind_share(ColumnKind::Categorical),
        kind_share(ColumnKind::Numeric),
        ds.rows_with_missing() as f64 / n,
        missing / (n * p),
    ];
    NAMES.iter().copied().zip(values.into_iter().map(Some)).collect()
}
