use super::*;
use crate::dataset::Column;
use crate::matrix::Matrix;
use crate::rng;
use rand::Rng;

fn numeric_ds(cols: Vec<Vec<f64>>, labels: &[usize]) -> Dataset {
    let n = labels.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    Dataset::from_numeric("t", &Matrix::from_rows(&rows), labels).unwrap()
}

fn blobs(n: usize, gap: f64, seed: u64) -> Dataset {
    let mut r = rng::rng(seed, 77);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let a: Vec<f64> = labels.iter().map(|&l| l as f64 * gap + r.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = labels.iter().map(|_| r.random_range(-1.0..1.0)).collect();
    numeric_ds(vec![a, b], &labels)
}

#[test]
fn catalogue_has_unique_names_and_enough_entries() {
    let cat = catalogue();
    assert!(cat.len() >= 41);
    let mut names: Vec<&str> = cat.iter().map(|e| e.0).collect();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), cat.len());
}

#[test]
fn extract_all_matches_catalogue_and_is_deterministic() {
    let ds = blobs(60, 3.0, 1);
    let v = extract_all(&ds, 7);
    let names: Vec<&str> = v.names().collect();
    let cat: Vec<&str> = catalogue().iter().map(|e| e.0).collect();
    assert_eq!(names, cat);
    assert_eq!(v, extract_all(&ds, 7));
}

#[test]
fn simple_ratios_and_class_proportions() {
    let labels: Vec<usize> = (0..100).map(|i| usize::from(i < 30)).collect();
    let cols = (0..5).map(|j| (0..100).map(|i| (i * (j + 1)) as f64).collect()).collect();
    let ds = numeric_ds(cols, &labels);
    let v = extract_simple(&ds);
    assert_eq!(v.get("attr_to_inst"), Some(0.05));
    assert_eq!(v.get("inst_to_attr"), Some(20.0));
    assert_eq!(v.get("freq_class_min"), Some(0.3));
    assert_eq!(v.get("freq_class_max"), Some(0.7));
}

#[test]
fn outliers_follow_the_boxplot_rule() {
    let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
    let mut col: Vec<f64> = (0..10).map(f64::from).collect();
    col[9] = 100.0;
    let ds = numeric_ds(vec![col], &labels);
    assert_eq!(extract_simple(&ds).get("nr_outliers"), Some(1.0));
}

#[test]
fn identical_columns_have_unit_correlation() {
    let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
    let a: Vec<f64> = (0..20).map(|i| ((i * 7) % 11) as f64).collect();
    let ds = numeric_ds(vec![a.clone(), a], &labels);
    assert_eq!(extract_statistical(&ds).get("cor_mean"), Some(1.0));
}

#[test]
fn statistical_entries_missing_without_numeric_attributes() {
    let cells: Vec<Option<&str>> = ["a", "b", "c", "a", "b", "c"].iter().map(|s| Some(*s)).collect();
    let ds = Dataset::new(
        "c",
        "c",
        vec![Column::categorical("f", &cells)],
        "y",
        &["0", "1", "0", "1", "0", "1"].map(String::from),
    )
    .unwrap();
    let v = extract_statistical(&ds);
    assert!(v.values().iter().all(Option::is_none));
}

#[test]
fn class_entropy_and_perfect_dependence() {
    let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
    let copy: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let ds = numeric_ds(vec![copy], &labels);
    let v = extract_info_theoretic(&ds);
    assert_eq!(v.get("class_entropy"), Some(1.0));
    assert_eq!(v.get("mutual_info_mean"), Some(1.0));
    assert_eq!(v.get("uncertainty_coef"), Some(1.0));
}

#[test]
fn independent_contingency_table_has_zero_information() {
    // 4x2 product distribution: p(x) = (1,2,3,4)/10, p(c) = (1,2)/3
    let mut x = Vec::new();
    let mut c = Vec::new();
    for (xv, nx) in [(0usize, 1usize), (1, 2), (2, 3), (3, 4)] {
        for (cv, nc) in [(0usize, 1usize), (1, 2)] {
            for _ in 0..nx * nc * 5 {
                x.push(xv);
                c.push(cv);
            }
        }
    }
    assert_eq!(mutual_information(&x, &c), 0.0);
}

#[test]
fn uninformative_attributes_leave_ratio_measures_missing() {
    let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
    let col: Vec<f64> = (0..40).map(|i| ((i / 2) % 4) as f64).collect();
    let ds = numeric_ds(vec![col], &labels);
    let v = extract_info_theoretic(&ds);
    assert_eq!(v.get("mutual_info_mean"), Some(0.0));
    assert_eq!(v.get("equiv_nr_attr"), None);
    assert_eq!(v.get("noise_signal_ratio"), None);
    assert!(v.contains("noise_signal_ratio"));
}

#[test]
fn discretizer_keeps_ties_together() {
    let codes = discretize(&[1.0, 1.0, 1.0, 1.0, 2.0, 3.0], 3);
    assert_eq!(codes[0], codes[3]);
    assert!(codes[4] <= codes[5]);
}

#[test]
fn separated_blobs_give_accurate_one_nn() {
    let ds = blobs(100, 10.0, 2);
    let v = extract_landmarking(&ds, 1);
    assert!(v.get("lm_one_nn").unwrap() >= 0.95);
    assert!(v.get("lm_decision_node").unwrap() >= 0.95);
}

#[test]
fn landmarkers_near_chance_on_noise() {
    let mut r = rng::rng(5, 5);
    let labels: Vec<usize> = (0..200).map(|_| r.random_range(0..2)).collect();
    let cols = (0..3).map(|_| (0..200).map(|_| r.random::<f64>()).collect()).collect();
    let ds = numeric_ds(cols, &labels);
    for s in landmarking::landmark_scores(&ds, 3) {
        let s = s.unwrap();
        assert!((s - 0.5).abs() <= 0.15, "{s}");
    }
}

#[test]
fn small_datasets_have_missing_landmarks() {
    let ds = blobs(8, 3.0, 3);
    let v = extract_landmarking(&ds, 0);
    assert!(v.values().iter().all(Option::is_none));
    let v = extract_model_based(&ds, 0);
    assert!(v.values().iter().all(Option::is_none));
}

#[test]
fn single_binary_attribute_split_tree() {
    let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
    let a: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let b: Vec<f64> = (0..20).map(|i| (i / 2) as f64).collect();
    let ds = numeric_ds(vec![b, a], &labels);
    let v = extract_model_based(&ds, 0);
    assert_eq!(v.get("tree_nodes"), Some(3.0));
    assert_eq!(v.get("tree_height"), Some(1.0));
    assert_eq!(v.get("attr_occurrence_max"), Some(1.0));
    assert_eq!(v.get("attr_occurrence_min"), Some(0.0));
    assert_eq!(v.get("info_gain_mean"), Some(1.0));
}

#[test]
fn degenerate_tree_has_height_zero_width_one() {
    let t = crate::learners::tree::Tree {
        nodes: vec![crate::learners::tree::Node::Leaf {
            value: vec![1.0, 0.0],
            samples: 5,
        }],
        n_features: 2,
    };
    let d: std::collections::HashMap<_, _> = model_based::describe(&t, 2, 2).into_iter().collect();
    assert_eq!(d["tree_nodes"], Some(1.0));
    assert_eq!(d["tree_leaves"], Some(1.0));
    assert_eq!(d["tree_height"], Some(0.0));
    assert_eq!(d["tree_width"], Some(1.0));
    assert_eq!(d["info_gain_mean"], None);
}

#[test]
fn fisher_ratio_uses_variance_sum() {
    assert_eq!(complexity::fisher_ratio(&[-1.0, 1.0], &[1.0, 3.0]), Some(2.0));
    assert_eq!(complexity::fisher_ratio(&[1.0, 1.0], &[1.0, 1.0]), None);
}

#[test]
fn disjoint_ranges_have_no_overlap_and_balance_is_uniform() {
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let a: Vec<f64> = labels.iter().enumerate().map(|(i, &l)| l as f64 * 10.0 + (i % 4) as f64).collect();
    let ds = numeric_ds(vec![a], &labels);
    let v = extract_complexity(&ds);
    assert_eq!(v.get("overlap_volume"), Some(0.0));
    assert_eq!(v.get("imbalance_ratio"), Some(1.0));
    assert!((v.get("class_prop_entropy").unwrap() - 3f64.log2()).abs() < 1e-12);
}

#[test]
fn vector_json_round_trip_keeps_order_and_nulls() {
    let ds = blobs(8, 3.0, 4);
    let v = extract_all(&ds, 0);
    let s = serde_json::to_string(&v).unwrap();
    let back: MetaFeatureVector = serde_json::from_str(&s).unwrap();
    assert_eq!(back, v);
    assert!(s.contains("\"lm_one_nn\":null"));
}
