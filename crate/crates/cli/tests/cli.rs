use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/corpus").join(name)
}

fn metakb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metakb"))
        .args(args)
        .env_remove("METAKB_KB")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = metakb(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON report")
}

fn manifest(dir: &Path, ids: &[&str]) -> PathBuf {
    let mut text = String::from("id,path,target\n");
    for id in ids {
        text.push_str(&format!("{id},{},class\n", corpus(&format!("{id}.csv")).display()));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, text).unwrap();
    path
}

fn build(dir: &Path, ids: &[&str], extra: &[&str]) -> PathBuf {
    let m = manifest(dir, ids);
    let kb = dir.join("kb");
    let mut args = vec![
        "build-kb",
        "--manifest",
        m.to_str().unwrap(),
        "--kb",
        kb.to_str().unwrap(),
        "--algorithms",
        "lr,dt",
        "--configs",
        "5",
        "--folds",
        "3",
        "--repeats",
        "1",
    ];
    args.extend_from_slice(extra);
    let out = metakb(&args);
    assert!(out.status.success(), "build failed: {}", String::from_utf8_lossy(&out.stderr));
    kb
}

fn subdir(root: &Path, name: &str) -> PathBuf {
    let p = root.join(name);
    fs::create_dir_all(&p).unwrap();
    p
}

fn experiments(kb: &Path) -> Vec<Value> {
    fs::read_to_string(kb.join("experiments.ndjson"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn extract_mf_reports_catalogue_and_provenance() {
    let path = corpus("blobs_a.csv");
    let v = ok_json(&["extract-mf", path.to_str().unwrap()]);
    assert_eq!(v["catalogue_version"], "mf-catalogue/1");
    assert_eq!(v["engine_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["run_config"]["command"], "extract-mf");
    assert_eq!(v["run_config"]["options"]["target"], "class");
    assert_eq!(v["dataset_id"], "blobs_a");
    let mf = v["metafeatures"].as_object().unwrap();
    assert!(mf.len() > 40);
    assert!(mf.contains_key("class_entropy"));
}

#[test]
fn extract_mf_is_byte_identical_for_a_seed() {
    let path = corpus("mixed_a.csv");
    let run = || metakb(&["extract-mf", path.to_str().unwrap(), "--seed", "7"]).stdout;
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
}

#[test]
fn missing_dataset_is_a_data_error_naming_the_path() {
    let out = metakb(&["extract-mf", "/no/such/dir/data.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/dir/data.csv"));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(metakb(&["extract-mf"]).status.code(), Some(1));
    assert_eq!(metakb(&["no-such-command"]).status.code(), Some(1));
    let path = corpus("xor_a.csv");
    let out = metakb(&["tune", path.to_str().unwrap(), "--algorithm", "lr", "--metric", "auc"]);
    assert_eq!(out.status.code(), Some(1));
    let out = metakb(&["tune", path.to_str().unwrap(), "--algorithm", "lr", "--budget", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(metakb(&["--help"]).status.code(), Some(0));
}

#[test]
fn build_kb_counts_and_metric_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let kb = build(tmp.path(), &["linear_a", "xor_a", "blobs_a"], &["--metrics", "accuracy,f1"]);
    let exps = experiments(&kb);
    assert_eq!(exps.len(), 3 * 2 * 5);
    for e in &exps {
        assert_eq!(e["status"], "ok", "{e}");
        let keys: Vec<&String> = e["scores"]["metrics"].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["accuracy", "f1"]);
    }
    let stats = ok_json(&["kb-stats", "--json", "--kb", kb.to_str().unwrap()]);
    assert_eq!(stats["stats"]["experiments"], 30);
    assert_eq!(stats["stats"]["pipelines"], 10);
}

#[test]
fn interrupted_build_resumes_to_the_same_kb() {
    let tmp = tempfile::tempdir().unwrap();
    let ids = ["linear_a", "rings_a", "sine_a"];
    let full = build(&subdir(tmp.path(), "a"), &ids, &[]);
    let part_dir = subdir(tmp.path(), "b");
    let m = manifest(&part_dir, &ids);
    let part = part_dir.join("kb");
    for limit in ["4", "13"] {
        let out = metakb(&[
            "build-kb", "--manifest", m.to_str().unwrap(), "--kb", part.to_str().unwrap(), "--algorithms", "lr,dt",
            "--configs", "5", "--folds", "3", "--repeats", "1", "--max-experiments", limit,
        ]);
        assert!(out.status.success());
        assert!(String::from_utf8_lossy(&out.stdout).contains("rerun to resume"));
    }
    build(&part_dir, &ids, &[]);
    for f in ["datasets.ndjson", "pipelines.ndjson"] {
        assert_eq!(fs::read(full.join(f)).unwrap(), fs::read(part.join(f)).unwrap(), "{f}");
    }
    let strip = |v: Vec<Value>| -> Vec<Value> {
        v.into_iter()
            .map(|e| {
                [&e["experiment_id"], &e["dataset_id"], &e["pipeline_id"], &e["scores"]["metrics"]]
                    .into_iter()
                    .cloned()
                    .collect()
            })
            .collect()
    };
    assert_eq!(strip(experiments(&full)), strip(experiments(&part)));
}

#[test]
fn resume_with_different_settings_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let kb = build(tmp.path(), &["linear_a"], &[]);
    let m = tmp.path().join("manifest.csv");
    let out = metakb(&[
        "build-kb", "--manifest", m.to_str().unwrap(), "--kb", kb.to_str().unwrap(), "--algorithms", "lr,dt",
        "--configs", "6", "--folds", "3", "--repeats", "1",
    ]);
    assert!(!out.status.success());
}

#[test]
fn recommend_excludes_self_truncates_and_reports_neighbors() {
    let tmp = tempfile::tempdir().unwrap();
    let kb = build(tmp.path(), &["linear_a", "linear_b", "xor_a", "blobs_a"], &[]);
    let q = corpus("linear_a.csv");
    let args = |extra: &[&str]| {
        let mut a = vec!["recommend", q.to_str().unwrap(), "--kb", kb.to_str().unwrap(), "--json"];
        a.extend_from_slice(extra);
        a.into_iter().map(String::from).collect::<Vec<_>>()
    };
    let run = |extra: &[&str]| {
        let a = args(extra);
        ok_json(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };

    let with_self = run(&["--top", "3"]);
    let rec = &with_self["recommendation"];
    let neighbors = rec["neighbors"].as_array().unwrap();
    assert_eq!(neighbors[0]["dataset_id"], "linear_a");
    assert_eq!(neighbors[0]["distance"], 0.0);
    assert!(rec["pipelines"].as_array().unwrap().len() <= 3);

    let without = run(&["--top", "3", "--exclude-self"]);
    let neighbors = without["recommendation"]["neighbors"].as_array().unwrap();
    assert_eq!(neighbors.len(), 3);
    assert!(neighbors.iter().all(|n| n["dataset_id"] != "linear_a" && n["distance"].as_f64().unwrap() > 0.0));
    assert_eq!(neighbors[0]["dataset_id"], "linear_b");
    for p in without["recommendation"]["pipelines"].as_array().unwrap() {
        assert!(p["config"]["algorithm"].is_string());
        assert!(p["support"].as_array().unwrap().iter().all(|s| s["dataset_id"] != "linear_a"));
    }
    assert_eq!(without["run_config"]["options"]["exclude_self"], true);
    assert_eq!(without["run_config"]["options"]["k"], 5);

    let rf = run(&["--method", "rf", "--trees", "20", "--top", "2"]);
    assert_eq!(rf["recommendation"]["method"], "rf");
    assert_eq!(rf["recommendation"]["pipelines"].as_array().unwrap().len(), 2);
}

#[test]
fn kb_path_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let kb = build(tmp.path(), &["xor_a", "rings_a"], &[]);
    let q = corpus("xor_b.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_metakb"))
        .args(["recommend", q.to_str().unwrap(), "--top", "2"])
        .env("METAKB_KB", &kb)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Nearest datasets"));
    assert!(text.contains("xor_a"));
}

#[test]
fn out_file_holds_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out_path = tmp.path().join("tune.json");
    let q = corpus("linear_a.csv");
    let args = [
        "tune", q.to_str().unwrap(), "--algorithm", "dt", "--strategy", "random", "--budget", "4", "--seed", "3",
        "--out", out_path.to_str().unwrap(),
    ];
    let out = metakb(&args);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("after 4 evaluations"));
    let first = fs::read(&out_path).unwrap();
    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["result"]["evaluations_used"], 4);
    assert_eq!(v["result"]["history"].as_array().unwrap().len(), 4);
    assert_eq!(v["run_config"]["seed"], 3);
    assert!(metakb(&args).status.success());
    assert_eq!(first, fs::read(&out_path).unwrap());
}

#[test]
fn loo_eval_reports_both_methods() {
    let tmp = tempfile::tempdir().unwrap();
    let kb = build(tmp.path(), &["linear_a", "linear_b", "xor_a", "xor_b", "blobs_a", "blobs_b"], &[]);
    let v = ok_json(&["loo-eval", "--kb", kb.to_str().unwrap(), "--trees", "20", "--json"]);
    assert_eq!(v["datasets"].as_array().unwrap().len(), 6);
    for m in ["knn", "rf"] {
        let h = v[m]["hit_rate"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&h));
    }
    assert_eq!(v["baseline"]["resamples"].as_array().unwrap().len(), 20);

    let small = tempfile::tempdir().unwrap();
    let kb = build(small.path(), &["linear_a", "xor_a"], &[]);
    assert_eq!(metakb(&["loo-eval", "--kb", kb.to_str().unwrap()]).status.code(), Some(2));
}
