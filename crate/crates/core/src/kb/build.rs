//! Batch construction of a knowledge base from a dataset manifest.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    now_secs, CvSpec, DatasetRecord, ExperimentRecord, KbManifest, KnowledgeBase, PipelineRecord,
    SourceInfo, Status, ENGINE_VERSION,
};
use crate::dataset::{load_dataset, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_pipeline, Metric, ScoreSet};
use crate::folds::{stratified_kfold, FoldPlan};
use crate::learners::{hp_space, AlgorithmId, HpConfig};
use crate::metafeatures::extract_all;
use crate::rng::{rng, stream};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub target: String,
}

/// Reads a dataset manifest: one `id,path,target` line per dataset. Blank
/// lines and `#` comments are ignored, as is an `id,path,target` header.
/// Relative paths are resolved against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out: Vec<ManifestEntry> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                row: i + 1,
                col: 0,
                message: format!("{}: expected `id,path,target`", path.display()),
            });
        }
        if out.is_empty() && fields == ["id", "path", "target"] {
            continue;
        }
        if out.iter().any(|e| e.id == fields[0]) {
            return Err(Error::Parse {
                row: i + 1,
                col: 0,
                message: format!("{}: duplicate dataset id `{}`", path.display(), fields[0]),
            });
        }
        out.push(ManifestEntry {
            id: fields[0].into(),
            path: base.join(fields[1]),
            target: fields[2].into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSpec {
    pub algorithms: Vec<AlgorithmId>,
    pub configs_per_algo: usize,
    pub metrics: Vec<Metric>,
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BuildSpec {
    fn default() -> Self {
        Self {
            algorithms: AlgorithmId::ALL.to_vec(),
            configs_per_algo: 50,
            metrics: Metric::ALL.to_vec(),
            k: 5,
            repeats: 2,
            seed: 0,
        }
    }
}

impl BuildSpec {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.metrics.is_empty() {
            return Err(Error::InvalidConfig("need at least one algorithm and one metric".into()));
        }
        if self.configs_per_algo == 0 {
            return Err(Error::InvalidConfig("configs_per_algo must be at least 1".into()));
        }
        if self.k < 2 || self.repeats == 0 {
            return Err(Error::InvalidConfig("cross-validation needs k ≥ 2 and repeats ≥ 1".into()));
        }
        Ok(())
    }

    fn cv(&self) -> CvSpec {
        CvSpec {
            k: self.k,
            repeats: self.repeats,
            seed: self.seed,
        }
    }

    /// The pipelines every dataset is evaluated with, in build order.
    /// Sampling duplicates are dropped, so an algorithm with a small
    /// space can contribute fewer than `configs_per_algo`.
    pub fn pipelines(&self) -> Vec<HpConfig> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &alg in &self.algorithms {
            let space = hp_space(alg);
            let mut r = rng(self.seed, stream::KB_PIPELINES ^ ((alg.index() as u64) << 8));
            for _ in 0..self.configs_per_algo {
                let cfg = HpConfig::new(alg, space.sample(&mut r), self.seed);
                if seen.insert(cfg.pipeline_id()) {
                    out.push(cfg);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Worker threads for pipeline evaluation; 0 uses rayon's default.
    pub jobs: usize,
    /// Stop after appending this many new experiments. Used to simulate an
    /// interrupted build.
    pub max_new_experiments: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub datasets_added: usize,
    pub experiments_added: usize,
    pub experiments_skipped: usize,
    pub failed: usize,
    pub complete: bool,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn keep_metrics(mut scores: ScoreSet, metrics: &[Metric]) -> ScoreSet {
    scores.metrics.retain(|m, _| metrics.contains(m));
    scores
}

fn run_one(cfg: &HpConfig, ds: &Dataset, plan: &std::result::Result<FoldPlan, String>, spec: &BuildSpec) -> ExperimentRecord {
    let result = match plan {
        Ok(plan) => evaluate_pipeline(cfg, ds, plan).map_err(|e| e.to_string()),
        Err(e) => Err(e.clone()),
    };
    let (status, error, runtime, memory, scores) = match result {
        Ok(s) => (Status::Ok, None, s.runtime_secs, s.peak_memory_bytes, Some(keep_metrics(s, &spec.metrics))),
        Err(e) => (Status::Failed, Some(e), 0.0, None, None),
    };
    ExperimentRecord {
        experiment_id: 0,
        dataset_id: ds.id().into(),
        pipeline_id: cfg.pipeline_id(),
        algorithm: cfg.algorithm,
        config: cfg.clone(),
        cv: spec.cv(),
        status,
        error,
        scores,
        runtime_secs: runtime,
        memory_bytes: memory,
        timestamp: now_secs(),
        engine_version: ENGINE_VERSION.into(),
    }
}

/// Builds or resumes the knowledge base at `dir`. Experiments already on
/// disk for a (dataset, pipeline) pair are skipped; appends happen on the
/// calling thread in dataset-major, pipeline order, so an interrupted and
/// resumed build produces the same log as an uninterrupted one.
pub fn build_kb(
    dir: impl AsRef<Path>,
    entries: &[ManifestEntry],
    spec: &BuildSpec,
    options: &BuildOptions,
) -> Result<(KnowledgeBase, BuildReport)> {
    spec.validate()?;
    if entries.is_empty() {
        return Err(Error::InvalidConfig("dataset manifest is empty".into()));
    }
    let dir = dir.as_ref();
    let mut kb = if dir.join(super::MANIFEST_FILE).exists() {
        let kb = KnowledgeBase::open(dir)?;
        if kb.manifest().build.as_ref() != Some(spec) {
            return Err(Error::Integrity(format!(
                "{} was built with different settings; use a fresh directory",
                dir.display()
            )));
        }
        if kb.manifest().engine_version != ENGINE_VERSION {
            return Err(Error::Integrity(format!(
                "{} was built by engine {}, this is {ENGINE_VERSION}",
                dir.display(),
                kb.manifest().engine_version
            )));
        }
        kb
    } else {
        KnowledgeBase::create(dir, KbManifest::new(Some(spec.clone())))?
    };
    build_into(&mut kb, entries, spec, options).map(|r| (kb, r))
}

/// Same as [`build_kb`] against an already opened (possibly in-memory) KB.
pub(crate) fn build_into(
    kb: &mut KnowledgeBase,
    entries: &[ManifestEntry],
    spec: &BuildSpec,
    options: &BuildOptions,
) -> Result<BuildReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let pipelines = spec.pipelines();
    for cfg in &pipelines {
        kb.add_pipeline(PipelineRecord {
            pipeline_id: cfg.pipeline_id(),
            algorithm: cfg.algorithm,
            config: cfg.clone(),
        })?;
    }
    let mut report = BuildReport::default();
    let mut budget = options.max_new_experiments.unwrap_or(usize::MAX);
    for entry in entries {
        let done: HashSet<&str> = kb
            .experiments()
            .iter()
            .filter(|e| e.dataset_id == entry.id)
            .map(|e| e.pipeline_id.as_str())
            .collect();
        let pending: Vec<&HpConfig> = pipelines
            .iter()
            .filter(|c| !done.contains(c.pipeline_id().as_str()))
            .collect();
        report.experiments_skipped += pipelines.len() - pending.len();
        let known = kb.dataset(&entry.id).is_some();
        if known && pending.is_empty() {
            continue;
        }
        if budget == 0 {
            return Ok(report);
        }
        let ds = load_dataset(&entry.path, &entry.target)?.with_id(entry.id.clone());
        if !known {
            kb.add_dataset(DatasetRecord {
                dataset_id: entry.id.clone(),
                name: ds.name().into(),
                source: SourceInfo {
                    path: entry.path.to_string_lossy().into_owned(),
                    target: entry.target.clone(),
                    sha256: file_sha256(&entry.path)?,
                    n: ds.n(),
                    p: ds.p(),
                    c: ds.c(),
                },
                metafeatures: extract_all(&ds, spec.seed),
            })?;
            report.datasets_added += 1;
        }
        let plan = stratified_kfold(&ds, spec.k, spec.repeats, spec.seed).map_err(|e| e.to_string());
        let batch: Vec<&HpConfig> = pending.into_iter().take(budget).collect();
        let records: Vec<ExperimentRecord> =
            pool.install(|| batch.par_iter().map(|cfg| run_one(cfg, &ds, &plan, spec)).collect());
        for rec in records {
            if !rec.ok() {
                report.failed += 1;
                log::warn!(
                    "{} on {} failed: {}",
                    rec.pipeline_id,
                    rec.dataset_id,
                    rec.error.as_deref().unwrap_or("")
                );
            }
            kb.append_experiment(rec)?;
            report.experiments_added += 1;
            budget -= 1;
        }
        log::info!("{}: {} experiments", entry.id, batch.len());
    }
    report.complete = true;
    Ok(report)
}

/// Re-runs a stored experiment from its dataset file and returns the fresh
/// scores restricted to the stored metrics.
pub fn replay_experiment(kb: &KnowledgeBase, record: &ExperimentRecord) -> Result<ScoreSet> {
    let d = kb
        .dataset(&record.dataset_id)
        .ok_or_else(|| Error::UnknownDataset(record.dataset_id.clone()))?;
    let path = PathBuf::from(&d.source.path);
    if file_sha256(&path)? != d.source.sha256 {
        return Err(Error::Integrity(format!("{} changed since it was recorded", path.display())));
    }
    let ds = load_dataset(&path, &d.source.target)?.with_id(d.dataset_id.clone());
    let plan = stratified_kfold(&ds, record.cv.k, record.cv.repeats, record.cv.seed)?;
    let scores = evaluate_pipeline(&record.config, &ds, &plan)?;
    let metrics: Vec<Metric> = record
        .scores
        .as_ref()
        .map(|s| s.metrics.keys().copied().collect())
        .unwrap_or_default();
    Ok(keep_metrics(scores, &metrics))
}
