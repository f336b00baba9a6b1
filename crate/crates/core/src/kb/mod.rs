//! The meta-knowledge base: datasets with their meta-features, evaluated
//! pipelines, and an append-only log of experiments, persisted as
//! line-delimited JSON.

mod build;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Metric, ScoreSet};
use crate::learners::{AlgorithmId, HpConfig};
use crate::metafeatures::{MetaFeatureVector, CATALOGUE_VERSION};

pub use build::{build_kb, read_manifest, replay_experiment, BuildOptions, BuildReport, BuildSpec, ManifestEntry};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const KB_FORMAT: &str = "metakb-kb";
pub const SCHEMA_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest";
pub const DATASETS_FILE: &str = "datasets.ndjson";
pub const PIPELINES_FILE: &str = "pipelines.ndjson";
pub const EXPERIMENTS_FILE: &str = "experiments.ndjson";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbManifest {
    pub format: String,
    pub schema_version: u32,
    pub engine_version: String,
    pub catalogue_version: String,
    /// Settings the stored experiments were produced with, when built by
    /// [`build_kb`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build: Option<BuildSpec>,
}

impl KbManifest {
    pub fn new(build: Option<BuildSpec>) -> Self {
        Self {
            format: KB_FORMAT.into(),
            schema_version: SCHEMA_VERSION,
            engine_version: ENGINE_VERSION.into(),
            catalogue_version: CATALOGUE_VERSION.into(),
            build,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub path: String,
    pub target: String,
    pub sha256: String,
    pub n: usize,
    pub p: usize,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub dataset_id: String,
    pub name: String,
    pub source: SourceInfo,
    pub metafeatures: MetaFeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRecord {
    pub pipeline_id: String,
    pub algorithm: AlgorithmId,
    pub config: HpConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvSpec {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_id: u64,
    pub dataset_id: String,
    pub pipeline_id: String,
    pub algorithm: AlgorithmId,
    pub config: HpConfig,
    pub cv: CvSpec,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreSet>,
    pub runtime_secs: f64,
    /// Approximate heap high-water mark; absent when not tracked.
    pub memory_bytes: Option<u64>,
    pub timestamp: u64,
    pub engine_version: String,
}

impl ExperimentRecord {
    pub fn ok(&self) -> bool {
        self.status == Status::Ok
    }

    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.scores.as_ref().and_then(|s| s.metrics.get(&metric)).map(|m| m.mean)
    }
}

pub fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// One pipeline's standing on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineScore {
    pub pipeline_id: String,
    pub algorithm: AlgorithmId,
    pub config: HpConfig,
    pub score: f64,
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbStats {
    pub datasets: usize,
    pub pipelines: usize,
    pub experiments: usize,
    pub failed_experiments: usize,
    pub classes: Option<Range>,
    pub attributes: Option<Range>,
    pub instances: Option<Range>,
}

/// Orders by score descending, runtime ascending, then pipeline id.
pub fn rank(scores: &mut [PipelineScore]) {
    scores.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.runtime_secs.total_cmp(&b.runtime_secs))
            .then_with(|| a.pipeline_id.cmp(&b.pipeline_id))
    });
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    root: Option<PathBuf>,
    manifest: KbManifest,
    datasets: Vec<DatasetRecord>,
    dataset_index: HashMap<String, usize>,
    pipelines: BTreeMap<String, PipelineRecord>,
    experiments: Vec<ExperimentRecord>,
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    // a crash mid-append can leave an unterminated last line; drop it
    let end = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if end < bytes.len() {
        log::warn!("{}: discarding {} bytes of incomplete trailing record", path.display(), bytes.len() - end);
        let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
        f.set_len(end as u64).map_err(|e| Error::io(path, e))?;
    }
    let mut out = Vec::new();
    for (i, line) in BufReader::new(&bytes[..end]).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            Error::Corrupt(format!("{} line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

fn append_line<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl KnowledgeBase {
    /// A KB that lives only in memory.
    pub fn in_memory(manifest: KbManifest) -> Self {
        Self {
            root: None,
            manifest,
            datasets: Vec::new(),
            dataset_index: HashMap::new(),
            pipelines: BTreeMap::new(),
            experiments: Vec::new(),
        }
    }

    /// Creates an empty KB directory; fails if one already exists there.
    pub fn create(root: impl AsRef<Path>, manifest: KbManifest) -> Result<Self> {
        let root = root.as_ref();
        let mpath = root.join(MANIFEST_FILE);
        if mpath.exists() {
            return Err(Error::Integrity(format!("{} already holds a knowledge base", root.display())));
        }
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        write_atomic(&mpath, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        let mut kb = Self::in_memory(manifest);
        kb.root = Some(root.to_path_buf());
        Ok(kb)
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let mpath = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: KbManifest =
            serde_json::from_str(&text).map_err(|e| Error::Corrupt(format!("{}: {e}", mpath.display())))?;
        if manifest.format != KB_FORMAT || manifest.schema_version != SCHEMA_VERSION {
            return Err(Error::Corrupt(format!(
                "unsupported knowledge base format {} v{}",
                manifest.format, manifest.schema_version
            )));
        }
        let mut kb = Self::in_memory(manifest);
        for d in read_lines::<DatasetRecord>(&root.join(DATASETS_FILE))? {
            kb.insert_dataset(d)?;
        }
        for p in read_lines::<PipelineRecord>(&root.join(PIPELINES_FILE))? {
            kb.pipelines.insert(p.pipeline_id.clone(), p);
        }
        for e in read_lines::<ExperimentRecord>(&root.join(EXPERIMENTS_FILE))? {
            kb.check_refs(&e)?;
            kb.experiments.push(e);
        }
        kb.root = Some(root.to_path_buf());
        Ok(kb)
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn manifest(&self) -> &KbManifest {
        &self.manifest
    }

    pub fn datasets(&self) -> &[DatasetRecord] {
        &self.datasets
    }

    pub fn dataset(&self, id: &str) -> Option<&DatasetRecord> {
        self.dataset_index.get(id).map(|&i| &self.datasets[i])
    }

    pub fn pipelines(&self) -> impl Iterator<Item = &PipelineRecord> {
        self.pipelines.values()
    }

    pub fn pipeline(&self, id: &str) -> Option<&PipelineRecord> {
        self.pipelines.get(id)
    }

    pub fn experiments(&self) -> &[ExperimentRecord] {
        &self.experiments
    }

    /// `(dataset_id, metric)` pairs with at least one successful experiment.
    pub fn learning_jobs(&self) -> Vec<(String, Metric)> {
        let mut jobs = Vec::new();
        for d in &self.datasets {
            for m in Metric::ALL {
                if self
                    .experiments
                    .iter()
                    .any(|e| e.dataset_id == d.dataset_id && e.mean(m).is_some())
                {
                    jobs.push((d.dataset_id.clone(), m));
                }
            }
        }
        jobs
    }

    fn insert_dataset(&mut self, d: DatasetRecord) -> Result<()> {
        if d.metafeatures.catalogue_version != self.manifest.catalogue_version {
            return Err(Error::CatalogueMismatch {
                expected: self.manifest.catalogue_version.clone(),
                got: d.metafeatures.catalogue_version.clone(),
            });
        }
        if self.dataset_index.contains_key(&d.dataset_id) {
            return Err(Error::Integrity(format!("dataset `{}` stored twice", d.dataset_id)));
        }
        self.dataset_index.insert(d.dataset_id.clone(), self.datasets.len());
        self.datasets.push(d);
        Ok(())
    }

    pub fn add_dataset(&mut self, d: DatasetRecord) -> Result<()> {
        let line = d.clone();
        self.insert_dataset(d)?;
        if let Some(root) = &self.root {
            append_line(&root.join(DATASETS_FILE), &line)?;
        }
        Ok(())
    }

    /// Registers a pipeline; re-adding an identical record is a no-op.
    pub fn add_pipeline(&mut self, p: PipelineRecord) -> Result<()> {
        if p.pipeline_id != p.config.pipeline_id() || p.algorithm != p.config.algorithm {
            return Err(Error::Integrity(format!("pipeline `{}` does not match its config", p.pipeline_id)));
        }
        if let Some(old) = self.pipelines.get(&p.pipeline_id) {
            if old.config.values == p.config.values {
                return Ok(());
            }
            return Err(Error::Integrity(format!("pipeline id `{}` collides", p.pipeline_id)));
        }
        if let Some(root) = &self.root {
            append_line(&root.join(PIPELINES_FILE), &p)?;
        }
        self.pipelines.insert(p.pipeline_id.clone(), p);
        Ok(())
    }

    fn check_refs(&self, e: &ExperimentRecord) -> Result<()> {
        if !self.dataset_index.contains_key(&e.dataset_id) {
            return Err(Error::Integrity(format!("experiment references unknown dataset `{}`", e.dataset_id)));
        }
        if !self.pipelines.contains_key(&e.pipeline_id) {
            return Err(Error::Integrity(format!(
                "experiment references unknown pipeline `{}`",
                e.pipeline_id
            )));
        }
        Ok(())
    }

    /// Appends a record, assigning the next experiment id. The record is
    /// on disk before this returns.
    pub fn append_experiment(&mut self, mut e: ExperimentRecord) -> Result<u64> {
        self.check_refs(&e)?;
        e.experiment_id = self.experiments.len() as u64;
        if let Some(root) = &self.root {
            append_line(&root.join(EXPERIMENTS_FILE), &e)?;
        }
        self.experiments.push(e);
        Ok(self.experiments.len() as u64 - 1)
    }

    /// Latest successful score of every pipeline evaluated on the dataset,
    /// ordered by pipeline id.
    pub fn dataset_scores(&self, dataset_id: &str, metric: Metric) -> Result<Vec<PipelineScore>> {
        if !self.dataset_index.contains_key(dataset_id) {
            return Err(Error::UnknownDataset(dataset_id.into()));
        }
        let mut latest: BTreeMap<&str, &ExperimentRecord> = BTreeMap::new();
        for e in &self.experiments {
            if e.dataset_id == dataset_id && e.mean(metric).is_some() {
                latest.insert(&e.pipeline_id, e);
            }
        }
        Ok(latest
            .into_values()
            .map(|e| PipelineScore {
                pipeline_id: e.pipeline_id.clone(),
                algorithm: e.algorithm,
                config: e.config.clone(),
                score: e.mean(metric).unwrap(),
                runtime_secs: e.runtime_secs,
            })
            .collect())
    }

    pub fn query_best(&self, dataset_id: &str, metric: Metric, top_n: usize) -> Result<Vec<PipelineScore>> {
        let mut scores = self.dataset_scores(dataset_id, metric)?;
        if scores.is_empty() {
            return Err(Error::NoExperiments(format!("{dataset_id} / {metric}")));
        }
        rank(&mut scores);
        scores.truncate(top_n);
        Ok(scores)
    }

    pub fn stats(&self) -> KbStats {
        let range = |f: &dyn Fn(&SourceInfo) -> usize| {
            let v: Vec<usize> = self.datasets.iter().map(|d| f(&d.source)).collect();
            Some(Range {
                min: *v.iter().min()?,
                max: *v.iter().max()?,
            })
        };
        KbStats {
            datasets: self.datasets.len(),
            pipelines: self.pipelines.len(),
            experiments: self.experiments.len(),
            failed_experiments: self.experiments.iter().filter(|e| !e.ok()).count(),
            classes: range(&|s| s.c),
            attributes: range(&|s| s.p),
            instances: range(&|s| s.n),
        }
    }
}
