//! Hyperparameter search: grid, random, Bayesian optimization with a
//! Gaussian-process surrogate, and a genetic algorithm. Every strategy
//! maximizes a black-box objective over a [`SearchSpace`].

pub mod gp;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StdNormal};

use crate::error::{Error, Result};
use crate::learners::space::{Domain, HpValue, ParamPoint, SearchSpace};
use crate::rng::{self, stream, EngineRng};
use gp::{GaussianProcess, GpHyper};

pub const DEFAULT_PER_DIM: usize = 5;
pub const DEFAULT_GRID_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: ParamPoint,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub strategy: String,
    pub best_config: ParamPoint,
    pub best_score: f64,
    pub history: Vec<Trial>,
    pub evaluations_used: usize,
    pub seed: u64,
    /// Bayesian optimization steps that fell back to random sampling.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallback_steps: Vec<usize>,
    /// Genetic search: best fitness in the population after each generation
    /// (initial population first).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generation_best: Vec<f64>,
}

impl SearchResult {
    fn new(strategy: &str, seed: u64) -> Self {
        Self {
            strategy: strategy.into(),
            best_config: ParamPoint::new(),
            best_score: f64::NEG_INFINITY,
            history: Vec::new(),
            evaluations_used: 0,
            seed,
            fallback_steps: Vec::new(),
            generation_best: Vec::new(),
        }
    }

    /// Records a trial; `ties_win` makes an equal score replace the incumbent.
    fn push(&mut self, config: ParamPoint, score: f64, ties_win: bool) {
        let better = self.history.is_empty()
            || score > self.best_score
            || (ties_win && score >= self.best_score);
        if better {
            self.best_score = score;
            self.best_config = config.clone();
        }
        self.history.push(Trial { config, score });
        self.evaluations_used += 1;
    }

    /// Best score seen after each evaluation.
    pub fn best_trace(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.history
            .iter()
            .map(|t| {
                best = best.max(t.score);
                best
            })
            .collect()
    }
}

/// Every grid point: categorical dims take all values, numeric dims
/// `per_dim` evenly (or log-) spaced values, conditional dims expand only
/// where their condition holds.
pub fn grid_points(space: &SearchSpace, per_dim: usize, cap: usize) -> Result<Vec<ParamPoint>> {
    if per_dim == 0 {
        return Err(Error::InvalidSearch("per_dim must be at least 1".into()));
    }
    let mut points = vec![ParamPoint::new()];
    for d in space.dimensions() {
        let values = d.domain.grid(per_dim);
        let mut next = Vec::new();
        for p in points {
            if d.is_active(&p) {
                for v in &values {
                    let mut q = p.clone();
                    q.insert(d.name.clone(), v.clone());
                    next.push(q);
                }
            } else {
                next.push(p);
            }
            if next.len() > cap {
                let bound = space
                    .dimensions()
                    .iter()
                    .map(|d| d.domain.grid(per_dim).len() as u128)
                    .product();
                return Err(Error::GridTooLarge { size: bound, cap });
            }
        }
        points = next;
    }
    Ok(points)
}

pub fn grid_search(
    space: &SearchSpace,
    mut objective: impl FnMut(&ParamPoint) -> f64,
    per_dim: usize,
    cap: usize,
) -> Result<SearchResult> {
    let mut res = SearchResult::new("grid", 0);
    for p in grid_points(space, per_dim, cap)? {
        let s = objective(&p);
        res.push(p, s, false);
    }
    Ok(res)
}

pub fn random_search(
    space: &SearchSpace,
    mut objective: impl FnMut(&ParamPoint) -> f64,
    budget: usize,
    seed: u64,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(Error::InvalidSearch("budget must be at least 1".into()));
    }
    let mut r = rng::rng(seed, stream::SEARCH);
    let mut res = SearchResult::new("random", seed);
    for _ in 0..budget {
        let p = space.sample(&mut r);
        let s = objective(&p);
        res.push(p, s, true);
    }
    Ok(res)
}

/// Unit-cube encoding for the surrogate: numeric dims via `to_unit`,
/// categorical dims one-hot; inactive dims encode as 0.5 / all zeros.
pub fn encode(space: &SearchSpace, p: &ParamPoint) -> Vec<f64> {
    let mut out = Vec::new();
    for d in space.dimensions() {
        let v = p.get(&d.name);
        match &d.domain {
            Domain::Categorical { values } => {
                for c in values {
                    out.push(f64::from(u8::from(v.and_then(HpValue::as_str) == Some(c.as_str()))));
                }
            }
            dom => out.push(v.map_or(0.5, |v| dom.to_unit(v))),
        }
    }
    out
}

/// Expected improvement over `best` for a maximization problem.
pub fn expected_improvement(mean: f64, var: f64, best: f64) -> f64 {
    let sd = var.max(0.0).sqrt();
    if sd <= 1e-12 {
        return (mean - best).max(0.0);
    }
    let z = (mean - best) / sd;
    let n = StdNormal::new(0.0, 1.0).unwrap();
    ((mean - best) * n.cdf(z) + sd * n.pdf(z)).max(0.0)
}

/// Incumbent perturbation: numeric genes jittered in unit space,
/// categorical genes resampled with small probability.
fn perturb(space: &SearchSpace, p: &ParamPoint, r: &mut EngineRng) -> ParamPoint {
    let jitter = Normal::new(0.0, 0.1).unwrap();
    let mut q = p.clone();
    for d in space.dimensions() {
        if let Some(v) = q.get(&d.name).cloned() {
            let nv = match &d.domain {
                Domain::Categorical { .. } => {
                    if r.random::<f64>() < 0.2 {
                        d.domain.sample(r)
                    } else {
                        v
                    }
                }
                dom => dom.from_unit(dom.to_unit(&v) + jitter.sample(r)),
            };
            q.insert(d.name.clone(), nv);
        }
    }
    space.repair(&mut q, r);
    q
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesOptions {
    pub init: usize,
    pub pool: usize,
    pub local: usize,
    pub noise_var: f64,
    pub restarts: usize,
}

impl Default for BayesOptions {
    fn default() -> Self {
        Self {
            init: 5,
            pool: 1000,
            local: 100,
            noise_var: 1e-6,
            restarts: 3,
        }
    }
}

pub fn bayes_opt(
    space: &SearchSpace,
    objective: impl FnMut(&ParamPoint) -> f64,
    budget: usize,
    seed: u64,
) -> Result<SearchResult> {
    bayes_opt_with(space, objective, budget, seed, BayesOptions::default())
}

pub fn bayes_opt_with(
    space: &SearchSpace,
    mut objective: impl FnMut(&ParamPoint) -> f64,
    budget: usize,
    seed: u64,
    opts: BayesOptions,
) -> Result<SearchResult> {
    if opts.init < 2 || budget <= opts.init {
        return Err(Error::InvalidSearch(format!(
            "need budget > init >= 2 (budget {budget}, init {})",
            opts.init
        )));
    }
    let mut r = rng::rng(seed, stream::SEARCH);
    let mut res = SearchResult::new("bayes", seed);
    for _ in 0..opts.init {
        let p = space.sample(&mut r);
        let s = objective(&p);
        res.push(p, s, false);
    }
    while res.evaluations_used < budget {
        let step = res.evaluations_used;
        let next = match propose(space, &res, &opts, &mut r) {
            Some(p) => p,
            None => {
                res.fallback_steps.push(step);
                space.sample(&mut r)
            }
        };
        let s = objective(&next);
        res.push(next, s, false);
    }
    Ok(res)
}

/// Surrogate-guided proposal, `None` when the observations are degenerate.
fn propose(space: &SearchSpace, res: &SearchResult, opts: &BayesOptions, r: &mut EngineRng) -> Option<ParamPoint> {
    let finite: Vec<&Trial> = res.history.iter().filter(|t| t.score.is_finite()).collect();
    if finite.len() < 2 {
        return None;
    }
    let y: Vec<f64> = finite.iter().map(|t| t.score).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    if sd <= 1e-12 * mean.abs().max(1.0) {
        return None;
    }
    let ys: Vec<f64> = y.iter().map(|v| (v - mean) / sd).collect();
    let x: Vec<Vec<f64>> = finite.iter().map(|t| encode(space, &t.config)).collect();
    let hyper = gp::fit_hyper(&x, &ys, opts.noise_var, opts.restarts, r);
    let model = GaussianProcess::fit(&x, &ys, 0.0, hyper)?;
    let best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut best_cand: Option<(f64, ParamPoint)> = None;
    let incumbent = res.best_config.clone();
    for i in 0..opts.pool + opts.local {
        let cand = if i < opts.pool {
            space.sample(r)
        } else {
            perturb(space, &incumbent, r)
        };
        let (m, v) = model.predict(&encode(space, &cand));
        let ei = expected_improvement(m, v, best);
        if best_cand.as_ref().is_none_or(|(b, _)| ei > *b) {
            best_cand = Some((ei, cand));
        }
    }
    best_cand.map(|(_, p)| p)
}

/// Posterior of the surrogate fitted exactly as a Bayesian-optimization
/// step would, for inspection.
pub fn fit_surrogate(x: &[Vec<f64>], y: &[f64], prior_mean: f64, hyper: GpHyper) -> Option<GaussianProcess> {
    GaussianProcess::fit(x, y, prior_mean, hyper)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaOptions {
    pub pop_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
}

pub const TOURNAMENT: usize = 3;

fn tournament(fit: &[f64], r: &mut EngineRng) -> usize {
    let mut best = r.random_range(0..fit.len());
    for _ in 1..TOURNAMENT {
        let c = r.random_range(0..fit.len());
        if fit[c] > fit[best] || (fit[c] == fit[best] && c < best) {
            best = c;
        }
    }
    best
}

fn key(p: &ParamPoint) -> String {
    serde_json::to_string(p).unwrap()
}

pub fn genetic_search(
    space: &SearchSpace,
    mut objective: impl FnMut(&ParamPoint) -> f64,
    opts: GaOptions,
    seed: u64,
) -> Result<SearchResult> {
    if opts.pop_size < 2 {
        return Err(Error::InvalidSearch("population needs at least 2 individuals".into()));
    }
    if !(0.0..=1.0).contains(&opts.crossover_rate) || !(0.0..=1.0).contains(&opts.mutation_rate) {
        return Err(Error::InvalidSearch("rates must lie in [0, 1]".into()));
    }
    let mut r = rng::rng(seed, stream::SEARCH);
    let mut res = SearchResult::new("genetic", seed);
    let mut known: BTreeMap<String, f64> = BTreeMap::new();
    let mut eval = |p: &ParamPoint, res: &mut SearchResult| -> f64 {
        let k = key(p);
        if let Some(&s) = known.get(&k) {
            return s;
        }
        let s = objective(p);
        known.insert(k, s);
        res.push(p.clone(), s, false);
        s
    };

    let mut pop: Vec<ParamPoint> = (0..opts.pop_size).map(|_| space.sample(&mut r)).collect();
    let mut fit: Vec<f64> = pop.iter().map(|p| eval(p, &mut res)).collect();
    let best_of = |fit: &[f64]| {
        (0..fit.len()).fold(0, |b, i| if fit[i] > fit[b] { i } else { b })
    };
    res.generation_best.push(fit[best_of(&fit)]);

    for _ in 0..opts.generations {
        let elite = best_of(&fit);
        let mut next = vec![pop[elite].clone()];
        let mut next_fit = vec![fit[elite]];
        while next.len() < opts.pop_size {
            let a = &pop[tournament(&fit, &mut r)];
            let b = &pop[tournament(&fit, &mut r)];
            let mut child = a.clone();
            for d in space.dimensions() {
                if r.random::<f64>() < opts.crossover_rate {
                    match b.get(&d.name) {
                        Some(v) => {
                            child.insert(d.name.clone(), v.clone());
                        }
                        None => {
                            child.remove(&d.name);
                        }
                    }
                }
                if r.random::<f64>() < opts.mutation_rate {
                    child.insert(d.name.clone(), d.domain.sample(&mut r));
                }
            }
            space.repair(&mut child, &mut r);
            let f = eval(&child, &mut res);
            next.push(child);
            next_fit.push(f);
        }
        pop = next;
        fit = next_fit;
        res.generation_best.push(fit[best_of(&fit)]);
    }
    Ok(res)
}
