use std::collections::BTreeMap;

use super::stats::sorted;
use super::Entries;
use crate::dataset::{ColumnKind, Dataset};

pub(super) const NAMES: &[&str] = &[
    "class_entropy",
    "attr_entropy_mean",
    "attr_entropy_norm_mean",
    "mutual_info_mean",
    "uncertainty_coef",
    "equiv_nr_attr",
    "noise_signal_ratio",
];

/// Mean mutual information below this is treated as zero.
const MI_ZERO: f64 = 1e-12;

pub const MAX_BINS: usize = 10;

/// Shannon entropy in bits of a count vector.
pub fn entropy_bits(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            q * q.log2()
        })
        .sum::<f64>()
}

/// Mutual information in bits between two aligned code sequences, from
/// exact contingency counts.
pub fn mutual_information(x: &[usize], c: &[usize]) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut nx: BTreeMap<usize, usize> = BTreeMap::new();
    let mut nc: BTreeMap<usize, usize> = BTreeMap::new();
    for (&a, &b) in x.iter().zip(c) {
        *joint.entry((a, b)).or_default() += 1;
        *nx.entry(a).or_default() += 1;
        *nc.entry(b).or_default() += 1;
    }
    let nf = n as f64;
    joint
        .iter()
        .map(|(&(a, b), &k)| {
            // the ratio is formed from integer products so independent
            // tables give exactly log2(1) = 0
            let num = (k as u128 * n as u128) as f64;
            let den = (nx[&a] as u128 * nc[&b] as u128) as f64;
            k as f64 / nf * (num / den).log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Equal-frequency bin codes for `values` using `n_bins` bins. Cut points
/// are order statistics, so tied values share a bin.
pub fn discretize(values: &[f64], n_bins: usize) -> Vec<usize> {
    let s = sorted(values);
    let m = s.len();
    let mut cuts: Vec<f64> = (1..n_bins).map(|k| s[k * m / n_bins]).collect();
    cuts.dedup();
    values
        .iter()
        .map(|v| cuts.partition_point(|c| c <= v))
        .collect()
}

/// Bin count for `m` present values: `ceil(sqrt(m))` capped at 10.
pub fn bin_count(m: usize) -> usize {
    ((m as f64).sqrt().ceil() as usize).clamp(1, MAX_BINS)
}

/// Categorical view of one column: level codes as-is, numeric values
/// discretized; `None` for missing cells.
pub(crate) fn codes(values: &[f64], kind: ColumnKind) -> Vec<Option<usize>> {
    let present: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    let binned = match kind {
        ColumnKind::Numeric if !present.is_empty() => discretize(&present, bin_count(present.len())),
        _ => present.iter().map(|&v| v as usize).collect(),
    };
    let mut it = binned.into_iter();
    values
        .iter()
        .map(|v| if v.is_nan() { None } else { it.next() })
        .collect()
}

/// `(x codes, class codes)` over rows where the attribute is present.
pub(crate) fn present_pairs(codes: &[Option<usize>], labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    codes
        .iter()
        .zip(labels)
        .filter_map(|(x, &c)| x.map(|x| (x, c)))
        .unzip()
}

fn counts_of(codes: &[usize]) -> Vec<usize> {
    let mut m: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in codes {
        *m.entry(c).or_default() += 1;
    }
    m.into_values().collect()
}

pub(super) fn extract(ds: &Dataset) -> Entries {
    let labels = ds.labels();
    let hc = entropy_bits(&ds.class_counts());
    let mut hx = Vec::new();
    let mut hx_norm = Vec::new();
    let mut mi = Vec::new();
    let mut uc = Vec::new();
    for col in ds.features() {
        let (x, c) = present_pairs(&codes(col.values(), col.kind()), labels);
        if x.is_empty() {
            continue;
        }
        let h = entropy_bits(&counts_of(&x));
        let m = mutual_information(&x, &c);
        hx.push(h);
        if x.len() > 1 {
            hx_norm.push(h / (x.len() as f64).log2());
        }
        mi.push(m);
        let hc_sub = entropy_bits(&counts_of(&c));
        if hc_sub > 0.0 {
            uc.push((m / hc_sub).clamp(0.0, 1.0));
        }
    }
    let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let mean_hx = avg(&hx);
    let mean_mi = avg(&mi);
    let informative = mean_mi.filter(|&m| m >= MI_ZERO);
    vec![
        ("class_entropy", Some(hc)),
        ("attr_entropy_mean", mean_hx),
        ("attr_entropy_norm_mean", avg(&hx_norm)),
        ("mutual_info_mean", mean_mi),
        ("uncertainty_coef", avg(&uc)),
        ("equiv_nr_attr", informative.map(|m| hc / m)),
        (
            "noise_signal_ratio",
            informative.and_then(|m| mean_hx.map(|h| (h - m) / m)),
        ),
    ]
}
