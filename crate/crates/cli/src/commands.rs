use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use metakb::evaluation::{evaluate_pipeline, Metric};
use metakb::hpo::{bayes_opt, genetic_search, grid_search, random_search, GaOptions, SearchResult, DEFAULT_GRID_CAP};
use metakb::kb::{build_kb, read_manifest, BuildOptions, BuildSpec, KnowledgeBase};
use metakb::metafeatures::{extract_all, CATALOGUE_VERSION};
use metakb::recommender::{
    loo_evaluate, recommend_knn, recommend_rf, train_rf_metamodel, KnnOptions, LooOptions, Method, Recommendation,
    RfOptions, DEFAULT_K,
};
use metakb::{hp_space, load_dataset, stratified_kfold, AlgorithmId, Dataset, HpConfig};
use serde::Serialize;
use serde_json::json;

use crate::report::{emit, RunConfig};

/// Invalid flag combinations found after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "metakb", version, about = "Meta-learning for classifier selection and hyperparameter recommendation")]
pub struct Cli {
    /// Worker threads for pipeline evaluation and distance computation (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Write the structured report to this file (atomically) and print the summary
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Print the structured report instead of the human summary
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the meta-feature vector of a dataset
    ExtractMf(ExtractArgs),
    /// Tune one algorithm's hyperparameters on a dataset
    Tune(TuneArgs),
    /// Build or resume a knowledge base from a dataset manifest
    BuildKb(BuildArgs),
    /// Recommend pipelines for a dataset from a knowledge base
    Recommend(RecommendArgs),
    /// Leave-one-dataset-out evaluation of the recommenders
    LooEval(LooArgs),
    /// Summarize a knowledge base
    KbStats(StatsArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DatasetArgs {
    /// CSV file with a header row
    pub dataset: PathBuf,
    /// Name of the class column
    #[arg(long, default_value = "class")]
    pub target: String,
    /// Dataset id used in reports and for --exclude-self (default: file stem)
    #[arg(long)]
    pub id: Option<String>,
}

impl DatasetArgs {
    fn resolve(&mut self) {
        if self.id.is_none() {
            self.id = Some(
                self.dataset
                    .file_stem()
                    .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned()),
            );
        }
    }

    fn load(&self) -> Result<Dataset> {
        let ds = load_dataset(&self.dataset, &self.target)?;
        Ok(ds.with_id(self.id.clone().unwrap_or_default()))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    /// Seed for the landmarking and model-based families
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Grid,
    Random,
    Bayes,
    Ga,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    /// Algorithm name or short code (lr, dt, svm, sgd, rf, et, gb, ada)
    #[arg(long)]
    pub algorithm: AlgorithmId,
    #[arg(long, value_enum, default_value_t = Strategy::Random)]
    pub strategy: Strategy,
    /// Objective evaluations; for grid, the largest grid accepted (default 100000)
    #[arg(long)]
    pub budget: Option<usize>,
    /// Values per numeric dimension for grid search
    #[arg(long, default_value_t = 5)]
    pub per_dim: usize,
    /// Population size for the genetic algorithm
    #[arg(long, default_value_t = 10)]
    pub population: usize,
    #[arg(long, default_value_t = Metric::Accuracy)]
    pub metric: Metric,
    /// Cross-validation folds
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Cross-validation repeats
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct KbArg {
    /// Knowledge base directory
    #[arg(long, env = "METAKB_KB")]
    pub kb: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    /// CSV manifest with columns id,path,target
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub kb: KbArg,
    /// Comma-separated algorithms (default: all eight)
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Vec<AlgorithmId>,
    /// Sampled configurations per algorithm
    #[arg(long, default_value_t = 50)]
    pub configs: usize,
    /// Comma-separated metrics to store (default: all)
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<Metric>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 2)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop after this many new experiments; rerun to resume
    #[arg(long)]
    pub max_experiments: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct RecommendArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub kb: KbArg,
    /// knn or rf
    #[arg(long, default_value = "knn")]
    pub method: Method,
    #[arg(long, default_value_t = Metric::Accuracy)]
    pub metric: Metric,
    /// Nearest datasets consulted by kNN
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Pipelines to return
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Leave the query's own id out of the knowledge base
    #[arg(long)]
    pub exclude_self: bool,
    /// Trees in the random-forest meta-model
    #[arg(long, default_value_t = metakb::recommender::DEFAULT_META_TREES)]
    pub trees: usize,
    /// Relative distance to the per-dataset best that counts as promising
    #[arg(long, default_value_t = metakb::recommender::DEFAULT_PROMISING_THRESHOLD)]
    pub threshold: f64,
    /// Seed for meta-features and the meta-model (default: the KB's build seed)
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct LooArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kb: KbArg,
    #[arg(long, default_value_t = Metric::Accuracy)]
    pub metric: Metric,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// A pick is a hit within this relative distance of the best score
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
    /// Random-pipeline baseline resamples
    #[arg(long, default_value_t = 20)]
    pub resamples: usize,
    /// Trees in the random-forest meta-model; 0 skips it
    #[arg(long, default_value_t = metakb::recommender::DEFAULT_META_TREES)]
    pub trees: usize,
    #[arg(long, default_value_t = metakb::recommender::DEFAULT_PROMISING_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kb: KbArg,
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::ExtractMf(a) => extract_mf(a, cli.jobs, out),
        Command::Tune(a) => tune(a, cli.jobs, out, cli.json),
        Command::BuildKb(a) => build(a, cli.jobs, out, cli.json),
        Command::Recommend(a) => recommend(a, cli.jobs, out, cli.json),
        Command::LooEval(a) => loo(a, cli.jobs, out, cli.json),
        Command::KbStats(a) => stats(a, cli.jobs, out, cli.json),
    }
}

fn extract_mf(mut a: ExtractArgs, jobs: usize, out: Option<&Path>) -> Result<()> {
    a.data.resolve();
    let ds = a.data.load()?;
    let mf = extract_all(&ds, a.seed);
    let run = RunConfig::new("extract-mf", a.seed, jobs, &a, out);
    let body = json!({
        "dataset_id": ds.id(),
        "n": ds.n(),
        "p": ds.p(),
        "c": ds.c(),
        "catalogue_version": CATALOGUE_VERSION,
        "metafeatures": mf.to_flat_json(),
    });
    let present = mf.entries().iter().filter(|(_, v)| v.is_some()).count();
    emit(
        &run,
        &body,
        || format!("{}: {} of {} meta-features present\n", ds.id(), present, mf.len()),
        true,
    )
}

#[derive(Serialize)]
struct TuneReport {
    dataset_id: String,
    algorithm: AlgorithmId,
    metric: Metric,
    failed_evaluations: usize,
    result: SearchResult,
}

fn tune(mut a: TuneArgs, jobs: usize, out: Option<&Path>, json: bool) -> Result<()> {
    a.data.resolve();
    if a.budget == Some(0) {
        return Err(usage("--budget must be at least 1"));
    }
    let ds = a.data.load()?;
    let plan = stratified_kfold(&ds, a.folds, a.repeats, a.seed)?;
    let space = hp_space(a.algorithm);
    let mut failed = 0;
    // A configuration that cannot be fitted scores the metric's floor.
    let objective = |p: &metakb::ParamPoint| {
        let cfg = HpConfig::new(a.algorithm, p.clone(), a.seed);
        match evaluate_pipeline(&cfg, &ds, &plan) {
            Ok(s) => s.mean(a.metric),
            Err(e) => {
                log::debug!("config failed: {e}");
                failed += 1;
                0.0
            }
        }
    };
    let budget = a.budget.unwrap_or(50);
    let result = match a.strategy {
        Strategy::Grid => grid_search(&space, objective, a.per_dim, a.budget.unwrap_or(DEFAULT_GRID_CAP))?,
        Strategy::Random => random_search(&space, objective, budget, a.seed)?,
        Strategy::Bayes => bayes_opt(&space, objective, budget, a.seed)?,
        Strategy::Ga => {
            let pop = a.population.min(budget).max(2);
            let opts = GaOptions {
                pop_size: pop,
                generations: (budget / pop).saturating_sub(1),
                crossover_rate: 0.9,
                mutation_rate: 0.2,
            };
            genetic_search(&space, objective, opts, a.seed)?
        }
    };
    let run = RunConfig::new("tune", a.seed, jobs, &a, out);
    let report = TuneReport {
        dataset_id: ds.id().to_string(),
        algorithm: a.algorithm,
        metric: a.metric,
        failed_evaluations: failed,
        result,
    };
    emit(&run, &report, || {
        let r = &report.result;
        let mut s = format!(
            "{} on {}: best {} = {:.4} after {} evaluations ({} failed)\n",
            report.algorithm, report.dataset_id, report.metric, r.best_score, r.evaluations_used, failed
        );
        for (k, v) in &r.best_config {
            let _ = writeln!(s, "  {k} = {v}");
        }
        s
    }, json)
}

fn build(a: BuildArgs, jobs: usize, out: Option<&Path>, json: bool) -> Result<()> {
    let spec = BuildSpec {
        algorithms: if a.algorithms.is_empty() { AlgorithmId::ALL.to_vec() } else { a.algorithms.clone() },
        configs_per_algo: a.configs,
        metrics: if a.metrics.is_empty() { Metric::ALL.to_vec() } else { a.metrics.clone() },
        k: a.folds,
        repeats: a.repeats,
        seed: a.seed,
    };
    if let Err(e) = spec.validate() {
        return Err(usage(e.to_string()));
    }
    let entries = read_manifest(&a.manifest)?;
    let opts = BuildOptions {
        jobs,
        max_new_experiments: a.max_experiments,
    };
    let (kb, report) = build_kb(&a.kb.kb, &entries, &spec, &opts)?;
    let run = RunConfig::new("build-kb", a.seed, jobs, &json!({ "args": &a, "spec": &spec }), out);
    let stats = kb.stats();
    let body = json!({ "build": &report, "stats": &stats });
    emit(&run, &body, || {
        format!(
            "{}: {} datasets, {} pipelines, {} experiments ({} new, {} failed){}\n",
            a.kb.kb.display(),
            stats.datasets,
            stats.pipelines,
            stats.experiments,
            report.experiments_added,
            report.failed,
            if report.complete { "" } else { "; incomplete, rerun to resume" }
        )
    }, json)
}

fn recommend(mut a: RecommendArgs, jobs: usize, out: Option<&Path>, json: bool) -> Result<()> {
    a.data.resolve();
    if a.top == 0 || a.k == 0 {
        return Err(usage("--k and --top must be at least 1"));
    }
    let kb = KnowledgeBase::open(&a.kb.kb)?;
    a.seed = Some(a.seed.unwrap_or_else(|| kb.manifest().build.as_ref().map_or(0, |b| b.seed)));
    let seed = a.seed.unwrap_or_default();
    let ds = a.data.load()?;
    let mf = extract_all(&ds, seed);
    let exclude = a.exclude_self.then(|| ds.id().to_string());
    let rec = match a.method {
        Method::Knn => recommend_knn(&kb, &mf, &KnnOptions {
            metric: a.metric,
            k: a.k,
            top_n: a.top,
            exclude,
        })?,
        Method::Rf => {
            let opts = RfOptions {
                metric: a.metric,
                trees: a.trees,
                promising_threshold: a.threshold,
                seed,
            };
            let model = train_rf_metamodel(&kb, &opts, exclude.as_deref())?;
            let candidates: Vec<HpConfig> = kb.pipelines().map(|p| p.config.clone()).collect();
            recommend_rf(&model, &mf, &candidates, a.top)?
        }
    };
    let run = RunConfig::new("recommend", seed, jobs, &a, out);
    let body = json!({ "dataset_id": ds.id(), "recommendation": &rec });
    emit(&run, &body, || human_ranking(ds.id(), &rec), json)
}

fn human_ranking(id: &str, rec: &Recommendation) -> String {
    let mut s = String::new();
    let label = match rec.method {
        Method::Knn => format!("predicted {}", rec.metric),
        Method::Rf => "P(promising)".to_string(),
    };
    let method = match rec.method {
        Method::Knn => "knn",
        Method::Rf => "rf",
    };
    let _ = writeln!(s, "Recommendations for {id} ({method}, {})", rec.metric);
    if !rec.neighbors.is_empty() {
        let _ = writeln!(s, "Nearest datasets:");
        for n in &rec.neighbors {
            let _ = writeln!(s, "  {:<24} distance {:.4}", n.dataset_id, n.distance);
        }
    }
    let _ = writeln!(s, "{:>4}  {:<20} {:<20} {:>14}", "rank", "pipeline", "algorithm", label);
    for (i, p) in rec.pipelines.iter().enumerate() {
        let _ = writeln!(s, "{:>4}  {:<20} {:<20} {:>14.4}", i + 1, p.pipeline_id, p.algorithm.name(), p.predicted_score);
    }
    s
}

fn loo(a: LooArgs, jobs: usize, out: Option<&Path>, json: bool) -> Result<()> {
    if !(0.0..=1.0).contains(&a.tolerance) {
        return Err(usage("--tolerance must lie in [0, 1]"));
    }
    let kb = KnowledgeBase::open(&a.kb.kb)?;
    let opts = LooOptions {
        metric: a.metric,
        k: a.k,
        hit_tolerance: a.tolerance,
        baseline_resamples: a.resamples,
        seed: a.seed,
        rf: (a.trees > 0).then_some(RfOptions {
            metric: a.metric,
            trees: a.trees,
            promising_threshold: a.threshold,
            seed: a.seed,
        }),
    };
    let report = loo_evaluate(&kb, &opts)?;
    let run = RunConfig::new("loo-eval", a.seed, jobs, &a, out);
    emit(&run, &report, || {
        let mut s = format!("Leave-one-dataset-out over {} datasets ({})\n", report.datasets.len(), a.metric);
        let _ = writeln!(s, "{:<10} {:>9} {:>12} {:>14} {:>11}", "method", "hit-rate", "mean regret", "median regret", "max regret");
        let mut line = |name: &str, m: &metakb::recommender::MethodSummary| {
            let _ = writeln!(
                s,
                "{name:<10} {:>9.3} {:>12.4} {:>14.4} {:>11.4}",
                m.hit_rate, m.mean_regret, m.median_regret, m.max_regret
            );
        };
        line("knn", &report.knn);
        if let Some(rf) = &report.rf {
            line("rf", rf);
        }
        let _ = writeln!(
            s,
            "random baseline: mean hit-rate {:.3} over {} resamples; P(baseline >= knn) = {:.3}",
            report.baseline.mean_hit_rate,
            report.baseline.resamples.len(),
            report.baseline.p_value
        );
        s
    }, json)
}

fn stats(a: StatsArgs, jobs: usize, out: Option<&Path>, json: bool) -> Result<()> {
    let kb = KnowledgeBase::open(&a.kb.kb)?;
    let stats = kb.stats();
    let run = RunConfig::new("kb-stats", 0, jobs, &a, out);
    let body = json!({ "manifest": kb.manifest(), "stats": &stats });
    emit(&run, &body, || {
        let range = |r: &Option<metakb::kb::Range>| r.as_ref().map_or("-".to_string(), |r| format!("{}..{}", r.min, r.max));
        format!(
            "datasets {}\npipelines {}\nexperiments {} ({} failed)\nclasses {}\nattributes {}\ninstances {}\n",
            stats.datasets,
            stats.pipelines,
            stats.experiments,
            stats.failed_experiments,
            range(&stats.classes),
            range(&stats.attributes),
            range(&stats.instances)
        )
    }, json)
}
