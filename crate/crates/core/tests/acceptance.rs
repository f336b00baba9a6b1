//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails. Every expected value is recomputed
//! here from first principles rather than taken from the engine.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use metakb::evaluation::{cross_validate, evaluate_pipeline, Metric};
use metakb::hpo::gp::{GaussianProcess, GpHyper};
use metakb::hpo::{bayes_opt, genetic_search, grid_search, random_search, GaOptions};
use metakb::kb::{
    build_kb, read_manifest, replay_experiment, BuildOptions, BuildSpec, ExperimentRecord, KnowledgeBase,
    DATASETS_FILE, EXPERIMENTS_FILE, PIPELINES_FILE,
};
use metakb::learners::space::Dimension;
use metakb::learners::MajorityClass;
use metakb::metafeatures::{extract_all, extract_complexity, extract_info_theoretic, extract_statistical, MetaFeatureVector};
use metakb::recommender::{loo_evaluate, recommend_knn, KnnOptions, LooOptions, MetaIndex, RfOptions};
use metakb::rng::{rng, EngineRng};
use metakb::{hp_space, load_dataset, stratified_kfold, AlgorithmId, Column, ColumnKind, Dataset, HpConfig, HpValue, Matrix, ParamPoint, SearchSpace};
use rand::seq::IndexedRandom;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

type Check = Result<String, String>;

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/corpus")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// ---------------------------------------------------------------------------
// meta-feature oracles

fn random_dataset(r: &mut EngineRng, idx: usize) -> Dataset {
    let n = r.random_range(20..80);
    let c = r.random_range(2..5);
    let p = r.random_range(2..6);
    let with_missing = idx % 3 == 0;
    let mut labels: Vec<String> = (0..n).map(|i| format!("k{}", i % c)).collect();
    for i in (1..n).rev() {
        labels.swap(i, r.random_range(0..=i));
    }
    let mut cols = Vec::new();
    for j in 0..p {
        let skew = r.random_range(0.0..2.0);
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                if with_missing && r.random_range(0.0..1.0) < 0.07 {
                    return f64::NAN;
                }
                let shift = labels[i].as_bytes()[1] as f64 * r.random_range(0.0..0.8);
                let z: f64 = r.random_range(-1.0..1.0);
                shift + z + skew * z * z * z + j as f64
            })
            .collect();
        cols.push(Column::numeric(format!("x{j}"), vals));
    }
    if idx % 2 == 0 {
        let levels = ["a", "b", "c", "d"];
        let cells: Vec<Option<&str>> = (0..n)
            .map(|_| {
                if with_missing && r.random_range(0.0..1.0) < 0.1 {
                    None
                } else {
                    Some(levels[r.random_range(0..levels.len())])
                }
            })
            .collect();
        cols.push(Column::categorical("cat", &cells));
    }
    Dataset::new(format!("r{idx}"), "random", cols, "class", &labels).unwrap()
}

fn ln_entropy(counts: &BTreeMap<Vec<usize>, usize>) -> f64 {
    let n: usize = counts.values().sum();
    let mut h = 0.0;
    for &k in counts.values() {
        let q = k as f64 / n as f64;
        h -= q * q.ln();
    }
    h / std::f64::consts::LN_2
}

fn oracle_class_entropy(ds: &Dataset) -> f64 {
    let mut counts = BTreeMap::new();
    for &l in ds.labels() {
        *counts.entry(vec![l]).or_insert(0) += 1;
    }
    ln_entropy(&counts)
}

fn oracle_bins(values: &[f64]) -> Vec<usize> {
    let m = values.len();
    let mut b = 1;
    while b * b < m {
        b += 1;
    }
    let b = b.min(10);
    let mut s = values.to_vec();
    s.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut cuts: Vec<f64> = Vec::new();
    for k in 1..b {
        let c = s[k * m / b];
        if cuts.last() != Some(&c) {
            cuts.push(c);
        }
    }
    values.iter().map(|v| cuts.iter().filter(|&&c| c <= *v).count()).collect()
}

fn oracle_mutual_info_mean(ds: &Dataset) -> Option<f64> {
    let mut mis = Vec::new();
    for col in ds.features() {
        let rows: Vec<usize> = (0..ds.n()).filter(|&i| !col.values()[i].is_nan()).collect();
        if rows.is_empty() {
            continue;
        }
        let present: Vec<f64> = rows.iter().map(|&i| col.values()[i]).collect();
        let codes: Vec<usize> = if col.kind() == ColumnKind::Numeric {
            oracle_bins(&present)
        } else {
            present.iter().map(|&v| v as usize).collect()
        };
        let mut hx = BTreeMap::new();
        let mut hc = BTreeMap::new();
        let mut hxc = BTreeMap::new();
        for (&i, &x) in rows.iter().zip(&codes) {
            let l = ds.labels()[i];
            *hx.entry(vec![x]).or_insert(0) += 1;
            *hc.entry(vec![l]).or_insert(0) += 1;
            *hxc.entry(vec![x, l]).or_insert(0) += 1;
        }
        mis.push(ln_entropy(&hx) + ln_entropy(&hc) - ln_entropy(&hxc));
    }
    (!mis.is_empty()).then(|| mis.iter().sum::<f64>() / mis.len() as f64)
}

fn moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    let mu = s / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in v {
        let d = x - mu;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    (m2 / n, m3 / n, m4 / n)
}

fn present(col: &Column) -> Vec<f64> {
    col.values().iter().copied().filter(|v| !v.is_nan()).collect()
}

fn live_numeric(ds: &Dataset) -> Vec<&Column> {
    ds.features()
        .iter()
        .filter(|c| c.kind() == ColumnKind::Numeric)
        .filter(|c| {
            let v = present(c);
            v.len() >= 2 && moments(&v).0 > 0.0
        })
        .collect()
}

fn avg(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn oracle_skew_kurt(ds: &Dataset) -> (Option<f64>, Option<f64>) {
    let mut sk = Vec::new();
    let mut ku = Vec::new();
    for c in live_numeric(ds) {
        let (m2, m3, m4) = moments(&present(c));
        sk.push(m3 / (m2 * m2.sqrt()));
        ku.push(m4 / (m2 * m2) - 3.0);
    }
    (avg(&sk), avg(&ku))
}

fn oracle_cor_mean(ds: &Dataset) -> Option<f64> {
    let cols = live_numeric(ds);
    let mut rs = Vec::new();
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for (x, y) in cols[a].values().iter().zip(cols[b].values()) {
                if x.is_nan() || y.is_nan() {
                    continue;
                }
                n += 1.0;
                sx += x;
                sy += y;
                sxx += x * x;
                syy += y * y;
                sxy += x * y;
            }
            let vx = n * sxx - sx * sx;
            let vy = n * syy - sy * sy;
            if n > 0.0 && vx > 0.0 && vy > 0.0 {
                rs.push(((n * sxy - sx * sy) / (vx * vy).sqrt()).abs());
            }
        }
    }
    avg(&rs)
}

fn oracle_fisher_max(ds: &Dataset) -> Option<f64> {
    let mut best: Option<f64> = None;
    for col in ds.features().iter().filter(|c| c.kind() == ColumnKind::Numeric) {
        for c1 in 0..ds.c() {
            for c2 in c1 + 1..ds.c() {
                let pick = |k: usize| -> Vec<f64> {
                    col.values()
                        .iter()
                        .zip(ds.labels())
                        .filter(|(v, &l)| l == k && !v.is_nan())
                        .map(|(v, _)| *v)
                        .collect()
                };
                let (a, b) = (pick(c1), pick(c2));
                if a.is_empty() || b.is_empty() {
                    continue;
                }
                let (va, vb) = (moments(&a).0, moments(&b).0);
                let ma = a.iter().sum::<f64>() / a.len() as f64;
                let mb = b.iter().sum::<f64>() / b.len() as f64;
                if va + vb > 0.0 {
                    let f = (ma - mb).powi(2) / (va + vb);
                    best = Some(best.map_or(f, |m| m.max(f)));
                }
            }
        }
    }
    best
}

fn compare(name: &str, engine: Option<f64>, oracle: Option<f64>, ds: &str) -> Result<(), String> {
    match (engine, oracle) {
        (None, None) => Ok(()),
        (Some(a), Some(b)) if close(a, b, 1e-9) => Ok(()),
        _ => Err(format!("{name} on {ds}: engine {engine:?}, oracle {oracle:?}")),
    }
}

fn metafeature_oracles() -> Check {
    let mut r = rng(2024, 0);
    let trials = 150;
    for idx in 0..trials {
        let ds = random_dataset(&mut r, idx);
        let st = extract_statistical(&ds);
        let it = extract_info_theoretic(&ds);
        let cx = extract_complexity(&ds);
        let (sk, ku) = oracle_skew_kurt(&ds);
        compare("class_entropy", it.get("class_entropy"), Some(oracle_class_entropy(&ds)), ds.id())?;
        compare("mutual_info_mean", it.get("mutual_info_mean"), oracle_mutual_info_mean(&ds), ds.id())?;
        compare("skewness_mean", st.get("skewness_mean"), sk, ds.id())?;
        compare("kurtosis_mean", st.get("kurtosis_mean"), ku, ds.id())?;
        compare("cor_mean", st.get("cor_mean"), oracle_cor_mean(&ds), ds.id())?;
        compare("fisher_ratio_max", cx.get("fisher_ratio_max"), oracle_fisher_max(&ds), ds.id())?;
    }
    Ok(format!("{trials} random datasets x 6 measures within 1e-9"))
}

// ---------------------------------------------------------------------------
// nearest-dataset ordering

fn random_vector(r: &mut EngineRng, id: String, dims: usize) -> MetaFeatureVector {
    MetaFeatureVector::new(
        id,
        (0..dims)
            .map(|j| {
                let v = (r.random_range(0.0..1.0) < 0.97).then(|| r.random_range(-5.0..5.0) * (j + 1) as f64);
                (format!("m{j}"), v)
            })
            .collect(),
    )
}

fn knd_ordering() -> Check {
    let dims = 41;
    let mut r = rng(77, 0);
    let kb: Vec<MetaFeatureVector> = (0..200).map(|i| random_vector(&mut r, format!("ds{i:03}"), dims)).collect();
    let refs: Vec<&MetaFeatureVector> = kb.iter().collect();
    let index = MetaIndex::new(&refs).map_err(|e| e.to_string())?;

    let mut mean = vec![0.0; dims];
    let mut sd = vec![0.0; dims];
    for j in 0..dims {
        let col: Vec<f64> = kb.iter().filter_map(|v| v.values()[j]).collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        mean[j] = m;
        sd[j] = (col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / col.len() as f64).sqrt();
    }
    let z = |v: &MetaFeatureVector| -> Vec<Option<f64>> {
        v.values().iter().enumerate().map(|(j, x)| x.map(|x| (x - mean[j]) / sd[j])).collect()
    };
    let zkb: Vec<Vec<Option<f64>>> = kb.iter().map(z).collect();
    for q in 0..50 {
        let query = random_vector(&mut r, format!("q{q}"), dims);
        let zq = z(&query);
        let mut all: Vec<(f64, &str)> = Vec::new();
        for (row, v) in zkb.iter().zip(&kb) {
            let mut sum = 0.0;
            let mut used = 0;
            for j in 0..dims {
                if let (Some(a), Some(b)) = (zq[j], row[j]) {
                    sum += (a - b) * (a - b);
                    used += 1;
                }
            }
            all.push(((sum * dims as f64 / used as f64).sqrt(), &v.dataset_id));
        }
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
        let got = index.knd(&query, 200).map_err(|e| e.to_string())?;
        let got: Vec<&str> = got.neighbors.iter().map(|n| n.dataset_id.as_str()).collect();
        let want: Vec<&str> = all.iter().map(|x| x.1).collect();
        ensure(got == want, || format!("query {q}: neighbor order differs from exhaustive sort"))?;
    }
    Ok("200 KB vectors x 50 queries, full order identical".into())
}

// ---------------------------------------------------------------------------
// search strategies

fn grid_contract() -> Result<(), String> {
    let space = SearchSpace::new(vec![
        Dimension::cat("a", &["p", "q", "r"]),
        Dimension::int("k", 1, 4, false),
        Dimension::real("x", 0.0, 1.0),
    ])
    .unwrap();
    let mut seen = Vec::new();
    let res = grid_search(&space, |p| {
        seen.push(p.clone());
        0.0
    }, 4, 1000)
    .map_err(|e| e.to_string())?;
    let mut expected = BTreeSet::new();
    for a in ["p", "q", "r"] {
        for k in 1..=4i64 {
            for x in [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0] {
                expected.insert(format!("{a}|{k}|{x:?}"));
            }
        }
    }
    let got: Vec<String> = seen
        .iter()
        .map(|p| format!("{}|{}|{:?}", p["a"], p["k"], p["x"].as_f64().unwrap()))
        .collect();
    let got_set: BTreeSet<String> = got.iter().cloned().collect();
    ensure(got.len() == 48 && res.evaluations_used == 48, || format!("grid evaluated {} points", got.len()))?;
    ensure(got_set == expected, || "grid points differ from the Cartesian product".into())
}

fn random_contract() -> Result<f64, String> {
    let space = SearchSpace::new(vec![Dimension::cat("a", &["p", "q"]), Dimension::real("x", 0.0, 1.0)]).unwrap();
    for budget in [1, 7, 37] {
        let mut calls = 0;
        let res = random_search(&space, |_| {
            calls += 1;
            0.0
        }, budget, 3)
        .map_err(|e| e.to_string())?;
        ensure(calls == budget && res.evaluations_used == budget, || format!("budget {budget}: {calls} calls"))?;
    }
    let (lo, hi) = (1e-10f64, 10.0f64);
    let log_space = SearchSpace::new(vec![Dimension::log_real("C", lo, hi)]).unwrap();
    let n = 10_000;
    let mut u = Vec::with_capacity(n);
    random_search(&log_space, |p| {
        u.push((p["C"].as_f64().unwrap().ln() - lo.ln()) / (hi.ln() - lo.ln()));
        0.0
    }, n, 11)
    .map_err(|e| e.to_string())?;
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / nf - x).max(x - i as f64 / nf))
        .fold(0.0, f64::max);
    // Kolmogorov critical value at alpha = 0.01
    let crit = (-0.5 * (0.01f64 / 2.0).ln()).sqrt() / (nf.sqrt() + 0.12 + 0.11 / nf.sqrt());
    ensure(d < crit, || format!("KS statistic {d:.5} >= critical {crit:.5}"))?;
    Ok(d)
}

fn inv3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 2, 1, 2), -c(1, 2, 0, 2), c(1, 2, 0, 1)],
        [-c(0, 2, 1, 2), c(0, 2, 0, 2), -c(0, 2, 0, 1)],
        [c(0, 1, 1, 2), -c(0, 1, 0, 2), c(0, 1, 0, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = cof[j][i] / det;
        }
    }
    inv
}

fn gp_contract() -> Result<usize, String> {
    let fixtures: Vec<(Vec<Vec<f64>>, [f64; 3], f64, Vec<f64>, f64, f64)> = vec![
        (vec![vec![0.1], vec![0.5], vec![0.9]], [0.2, -0.4, 1.0], 0.0, vec![0.3], 1.0, 1e-6),
        (vec![vec![0.0], vec![0.2], vec![1.0]], [1.5, 1.0, -2.0], 0.3, vec![0.25], 2.0, 1e-3),
        (vec![vec![0.1, 0.8], vec![0.6, 0.2], vec![0.9, 0.9]], [0.0, 1.0, 0.5], -0.1, vec![0.4, 0.7], 0.7, 1e-4),
        (vec![vec![0.2, 0.2], vec![0.25, 0.3], vec![0.8, 0.1]], [-1.0, -0.8, 2.0], 0.5, vec![0.2, 1.5], 1.3, 1e-2),
    ];
    let mut checked = 0;
    for (x, y, prior, ls, sf2, noise) in fixtures {
        let k = |a: &[f64], b: &[f64]| {
            let mut d2 = 0.0;
            for j in 0..a.len() {
                d2 += ((a[j] - b[j]) / ls[j]).powi(2);
            }
            sf2 * (-0.5 * d2).exp()
        };
        let mut kxx = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                kxx[i][j] = k(&x[i], &x[j]) + if i == j { noise } else { 0.0 };
            }
        }
        let inv = inv3(kxx);
        let gp = GaussianProcess::fit(&x, &y, prior, GpHyper {
            length_scales: ls.clone(),
            signal_var: sf2,
            noise_var: noise,
        })
        .ok_or("GP fit failed on a well-conditioned fixture")?;
        let queries: Vec<Vec<f64>> = (0..7)
            .map(|t| x[0].iter().enumerate().map(|(j, _)| t as f64 / 6.0 + 0.05 * j as f64).collect())
            .chain(x.iter().cloned())
            .collect();
        for q in queries {
            let kq: Vec<f64> = x.iter().map(|xi| k(xi, &q)).collect();
            let mut mean = prior;
            let mut quad = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    mean += kq[i] * inv[i][j] * (y[j] - prior);
                    quad += kq[i] * inv[i][j] * kq[j];
                }
            }
            let var = k(&q, &q) - quad;
            let (m, v) = gp.predict(&q);
            ensure((m - mean).abs() < 1e-9 && (v - var.max(0.0)).abs() < 1e-9, || {
                format!("posterior at {q:?}: engine ({m}, {v}), closed form ({mean}, {var})")
            })?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn ga_contract() -> Result<(), String> {
    let space = SearchSpace::new(vec![
        Dimension::real("x", 0.0, 1.0),
        Dimension::int("k", 0, 10, false),
        Dimension::cat("m", &["u", "v", "w"]),
    ])
    .unwrap();
    let f = |p: &ParamPoint| {
        let x = p["x"].as_f64().unwrap();
        let k = p["k"].as_f64().unwrap();
        let bonus = if p["m"] == HpValue::Cat("v".into()) { 0.5 } else { 0.0 };
        -(x - 0.3).powi(2) - 0.05 * (k - 7.0).powi(2) + bonus
    };
    for seed in 0..20 {
        let res = genetic_search(&space, f, GaOptions {
            pop_size: 12,
            generations: 15,
            crossover_rate: 0.8,
            mutation_rate: 0.3,
        }, seed)
        .map_err(|e| e.to_string())?;
        ensure(res.generation_best.windows(2).all(|w| w[1] >= w[0]), || {
            format!("seed {seed}: best fitness decreased: {:?}", res.generation_best)
        })?;
    }
    Ok(())
}

fn bo_vs_random() -> Result<(f64, f64, f64), String> {
    let space = SearchSpace::new(vec![Dimension::real("x", 0.0, 1.0)]).unwrap();
    let f = |p: &ParamPoint| {
        let x = p["x"].as_f64().unwrap();
        -(x - 0.3) * (x - 0.3)
    };
    let budget = 15;
    let mut diffs = Vec::new();
    let (mut sb, mut sr) = (0.0, 0.0);
    for seed in 0..100 {
        let b = bayes_opt(&space, f, budget, seed).map_err(|e| e.to_string())?.best_score;
        let r = random_search(&space, f, budget, seed).map_err(|e| e.to_string())?.best_score;
        sb += b;
        sr += r;
        diffs.push(b - r);
    }
    let n = diffs.len() as f64;
    let md = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - md).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = md / (sd / n.sqrt());
    let p = 1.0 - StudentsT::new(0.0, 1.0, n - 1.0).unwrap().cdf(t);
    ensure(sb / n > sr / n && p < 0.05, || {
        format!("BO mean {:.3e}, random mean {:.3e}, paired p = {p:.3}", sb / n, sr / n)
    })?;
    Ok((sb / n, sr / n, p))
}

fn hpo_contracts() -> Check {
    grid_contract()?;
    let d = random_contract()?;
    let gp_points = gp_contract()?;
    ga_contract()?;
    let (bo, rs, p) = bo_vs_random()?;
    Ok(format!(
        "grid 48/48, KS D={d:.4}, GP {gp_points} posteriors, GA monotone x20, BO {bo:.2e} vs random {rs:.2e} (p={p:.1e})"
    ))
}

// ---------------------------------------------------------------------------
// learners

fn separable(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed, 0);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    while rows.len() < n {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let s = 1.5 * x[0] - x[1] + 0.5 * x[2];
        if s.abs() < 0.3 {
            continue;
        }
        labels.push(usize::from(s > 0.0));
        rows.push(x);
    }
    Dataset::from_numeric("separable", &Matrix::from_rows(&rows), &labels).unwrap()
}

fn learner_sanity() -> Check {
    let ds = separable(200, 5);
    let plan = stratified_kfold(&ds, 5, 1, 0).map_err(|e| e.to_string())?;
    let mut tries = Vec::new();
    for alg in AlgorithmId::ALL {
        let space = hp_space(alg);
        let mut r = rng(9, alg.index() as u64);
        let mut best = 0.0f64;
        let mut n = 0;
        while n < 30 && best < 0.9 {
            let cfg = HpConfig::new(alg, space.sample(&mut r), 0);
            n += 1;
            if let Ok(s) = evaluate_pipeline(&cfg, &ds, &plan) {
                best = best.max(s.mean(Metric::Accuracy));
            }
        }
        ensure(best >= 0.9, || format!("{} peaked at {best:.3} over {n} configs", alg.name()))?;
        tries.push(format!("{}:{n}", alg.short()));
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut r = rng(1, 1);
    for i in 0..200 {
        rows.push(vec![r.random_range(0.0..1.0)]);
        labels.push(usize::from(i % 10 < 3));
    }
    let base = labels.iter().filter(|&&l| l == 0).count() as f64 / labels.len() as f64;
    let ds = Dataset::from_numeric("majority", &Matrix::from_rows(&rows), &labels).unwrap();
    let plan = stratified_kfold(&ds, 5, 2, 3).map_err(|e| e.to_string())?;
    let s = cross_validate(&ds, &plan, |x, y, c| Ok(MajorityClass::fit(x, y, c)), |_, _, _| {})
        .map_err(|e| e.to_string())?;
    let acc = s.score(Metric::Accuracy);
    ensure(acc.mean == base && acc.folds.iter().all(|&f| f == base), || {
        format!("majority CV accuracy {} != base rate {base}", acc.mean)
    })?;
    Ok(format!("configs tried until >=0.9 [{}]; majority = base rate {base}", tries.join(" ")))
}

// ---------------------------------------------------------------------------
// knowledge base

fn comparable(e: &ExperimentRecord) -> String {
    let mut e = e.clone();
    e.runtime_secs = 0.0;
    e.memory_bytes = None;
    e.timestamp = 0;
    if let Some(s) = e.scores.as_mut() {
        s.runtime_secs = 0.0;
        s.peak_memory_bytes = None;
    }
    serde_json::to_string(&e).unwrap()
}

fn kb_build() -> Check {
    let entries = read_manifest(corpus_dir().join("bundled.csv")).map_err(|e| e.to_string())?;
    ensure(entries.len() == 10, || format!("bundled manifest lists {} datasets", entries.len()))?;
    let spec = BuildSpec {
        algorithms: AlgorithmId::ALL.to_vec(),
        configs_per_algo: 20,
        metrics: Metric::ALL.to_vec(),
        k: 5,
        repeats: 2,
        seed: 42,
    };
    let n_pipes = spec.pipelines().len();
    ensure(n_pipes == 160, || format!("{n_pipes} distinct pipelines"))?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let full = tmp.path().join("full");
    let t = Instant::now();
    let (kb, report) = build_kb(&full, &entries, &spec, &BuildOptions::default()).map_err(|e| e.to_string())?;
    let build_time = t.elapsed();
    ensure(report.complete && kb.experiments().len() == 1600, || {
        format!("{} experiments recorded", kb.experiments().len())
    })?;
    let pairs: BTreeSet<(&str, &str)> = kb
        .experiments()
        .iter()
        .map(|e| (e.dataset_id.as_str(), e.pipeline_id.as_str()))
        .collect();
    ensure(pairs.len() == 1600, || "duplicate (dataset, pipeline) pairs".into())?;

    let reopened = KnowledgeBase::open(&full).map_err(|e| e.to_string())?;
    let ok: Vec<&ExperimentRecord> = reopened.experiments().iter().filter(|e| e.ok()).collect();
    let mut r = rng(7, 0);
    for rec in ok.choose_multiple(&mut r, 20) {
        let fresh = replay_experiment(&reopened, rec).map_err(|e| e.to_string())?;
        let stored = &rec.scores.as_ref().unwrap().metrics;
        let same = stored.len() == fresh.metrics.len()
            && stored.iter().all(|(m, s)| {
                let f = &fresh.metrics[m];
                s.mean.to_bits() == f.mean.to_bits()
                    && s.std.to_bits() == f.std.to_bits()
                    && s.folds.iter().zip(&f.folds).all(|(a, b)| a.to_bits() == b.to_bits())
            });
        ensure(same, || format!("replay of experiment {} differs", rec.experiment_id))?;
    }

    // interrupted twice, once with a torn trailing write, then resumed
    let part = tmp.path().join("part");
    for limit in [397, 611] {
        let opts = BuildOptions {
            max_new_experiments: Some(limit),
            ..Default::default()
        };
        let (_, rep) = build_kb(&part, &entries, &spec, &opts).map_err(|e| e.to_string())?;
        ensure(!rep.complete, || "interrupted build reported completion".into())?;
    }
    OpenOptions::new()
        .append(true)
        .open(part.join(EXPERIMENTS_FILE))
        .and_then(|mut f| f.write_all(b"{\"experiment_id\":1008,\"dataset_"))
        .map_err(|e| e.to_string())?;
    let (resumed, rep) = build_kb(&part, &entries, &spec, &BuildOptions::default()).map_err(|e| e.to_string())?;
    ensure(rep.complete && rep.experiments_added == 1600 - 1008, || format!("resume added {}", rep.experiments_added))?;
    for file in [DATASETS_FILE, PIPELINES_FILE] {
        let a = fs::read(full.join(file)).map_err(|e| e.to_string())?;
        let b = fs::read(part.join(file)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{file} differs between interrupted and uninterrupted builds"))?;
    }
    let a: Vec<String> = kb.experiments().iter().map(comparable).collect();
    let b: Vec<String> = resumed.experiments().iter().map(comparable).collect();
    ensure(a == b, || "experiment logs differ between interrupted and uninterrupted builds".into())?;

    Ok(format!(
        "1600 experiments ({} failed) in {:.0}s; 20 replays bit-identical; resumed build identical",
        report.failed,
        build_time.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// recommendation quality and latency

fn loo_kb(dir: &Path) -> Result<KnowledgeBase, String> {
    let entries = read_manifest(corpus_dir().join("manifest.csv")).map_err(|e| e.to_string())?;
    ensure(entries.len() == 20, || format!("corpus manifest lists {} datasets", entries.len()))?;
    let spec = BuildSpec {
        algorithms: AlgorithmId::ALL.to_vec(),
        configs_per_algo: 10,
        metrics: vec![Metric::Accuracy],
        k: 5,
        repeats: 1,
        seed: 0,
    };
    build_kb(dir, &entries, &spec, &BuildOptions::default())
        .map(|(kb, _)| kb)
        .map_err(|e| e.to_string())
}

fn loo_quality(dir: &Path) -> Check {
    let kb = loo_kb(dir)?;
    let report = loo_evaluate(&kb, &LooOptions {
        rf: Some(RfOptions {
            trees: 100,
            ..Default::default()
        }),
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let hr = report.knn.hit_rate;
    let max_baseline = report.baseline.resamples.iter().copied().fold(0.0, f64::max);
    let detail = format!(
        "kNN hit-rate {hr:.2} (median regret {:.3}), RF {:.2}, random baseline mean {:.3} max {max_baseline:.2}, p={:.3}",
        report.knn.median_regret,
        report.rf.as_ref().map_or(f64::NAN, |s| s.hit_rate),
        report.baseline.mean_hit_rate,
        report.baseline.p_value
    );
    ensure(hr >= 0.6 && hr > max_baseline && report.baseline.p_value < 0.05, || detail.clone())?;
    Ok(detail)
}

fn latency(dir: &Path) -> Check {
    let kb = KnowledgeBase::open(dir).map_err(|e| format!("KB from the previous criterion unavailable: {e}"))?;
    let ds = load_dataset(corpus_dir().join("sine_a.csv"), "class").map_err(|e| e.to_string())?;
    let mf = extract_all(&ds.with_id("sine_a"), 0);
    let opts = KnnOptions {
        exclude: Some("sine_a".into()),
        ..Default::default()
    };
    let mut times = Vec::new();
    for _ in 0..30 {
        let t = Instant::now();
        let rec = recommend_knn(&kb, &mf, &opts).map_err(|e| e.to_string())?;
        times.push(t.elapsed());
        ensure(!rec.pipelines.is_empty(), || "empty recommendation".into())?;
    }
    times.sort();
    let worst = *times.last().unwrap();
    ensure(worst < Duration::from_millis(100), || format!("slowest recommendation {worst:?}"))?;
    Ok(format!(
        "{} experiments; median {:?}, slowest {worst:?} over 30 runs",
        kb.experiments().len(),
        times[times.len() / 2]
    ))
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let loo_dir = scratch.path().join("corpus-kb");
    let criteria: Vec<(&str, Duration, Box<dyn FnOnce() -> Check>)> = vec![
        ("meta-feature oracles", Duration::from_secs(60), Box::new(metafeature_oracles)),
        ("nearest-dataset ordering", Duration::from_secs(10), Box::new(knd_ordering)),
        ("search strategy contracts", Duration::from_secs(300), Box::new(hpo_contracts)),
        ("learner sanity", Duration::from_secs(120), Box::new(learner_sanity)),
        ("knowledge base build", Duration::from_secs(1800), Box::new(kb_build)),
        ("leave-one-dataset-out quality", Duration::from_secs(1800), Box::new({
            let d = loo_dir.clone();
            move || loo_quality(&d)
        })),
        ("recommendation latency", Duration::from_secs(60), Box::new({
            let d = loo_dir.clone();
            move || latency(&d)
        })),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let t = Instant::now();
        let mut outcome = run();
        let elapsed = t.elapsed();
        if outcome.is_ok() && elapsed > limit {
            outcome = Err(format!("took {elapsed:.1?}, limit {limit:?}"));
        }
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.1}s]", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{:.1}s]", elapsed.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
