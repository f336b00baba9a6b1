//! Linear classifiers: regularized logistic regression solved by
//! accelerated proximal gradient, and a plain SGD classifier with the
//! usual margin losses and learning-rate schedules.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::preprocess::Standardizer;
use crate::matrix::Matrix;
use crate::rng::EngineRng;

/// One-vs-rest linear model over standardized inputs. Binary problems
/// carry a single score vector for class 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub scaler: Standardizer,
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub n_classes: usize,
}

impl LinearModel {
    pub fn decision(&self, row: &[f64], buf: &mut Vec<f64>) -> Vec<f64> {
        self.scaler.transform_row(row, buf);
        let scores: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| dot(w, buf) + b)
            .collect();
        if self.n_classes == 2 {
            vec![-scores[0], scores[0]]
        } else {
            scores
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Targets for each one-vs-rest problem, as ±1.
pub(crate) fn ovr_targets(y: &[usize], n_classes: usize) -> Vec<Vec<f64>> {
    let positives: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
    positives
        .into_iter()
        .map(|k| y.iter().map(|&v| if v == k { 1.0 } else { -1.0 }).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    L1,
    L2,
    ElasticNet,
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticParams {
    pub c: f64,
    pub penalty: Penalty,
    pub fit_intercept: bool,
    pub max_iter: usize,
    pub tol: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-m))` without overflow.
fn log_loss_margin(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// Minimizes `mean_i log(1 + exp(-t_i (w·x_i + b))) + R(w) / (C n)` where
/// `R = ||w||² / 2` (l2) or `||w||₁` (l1). This is the usual
/// `C Σ loss + R(w)` objective divided by `C n`.
pub(crate) fn fit_binary_logistic(x: &Matrix, t: &[f64], p: &LogisticParams) -> (Vec<f64>, f64) {
    let n = x.rows() as f64;
    let d = x.cols();
    let lambda = 1.0 / (p.c * n);
    let mean_sq_norm = (0..x.rows())
        .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>() + f64::from(u8::from(p.fit_intercept)))
        .sum::<f64>()
        / n;
    let step = 1.0 / (0.25 * mean_sq_norm).max(1e-12);

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut zw = w.clone();
    let mut zb = b;
    let mut tk = 1.0f64;
    let mut grad = vec![0.0; d];
    for _ in 0..p.max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for i in 0..x.rows() {
            let row = x.row(i);
            let m = t[i] * (dot(&zw, row) + zb);
            // d/dz log(1+exp(-t z)) = -t * sigmoid(-m)
            let coef = -t[i] * sigmoid(-m) / n;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += coef * v;
            }
            gb += coef;
        }
        let mut w_next: Vec<f64> = zw.iter().zip(&grad).map(|(z, g)| z - step * g).collect();
        prox(&mut w_next, step * lambda, p.penalty, 1.0);
        let b_next = if p.fit_intercept { zb - step * gb } else { 0.0 };

        let t_next = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        let mom = (tk - 1.0) / t_next;
        let mut delta = (b_next - b).abs();
        for j in 0..d {
            delta = delta.max((w_next[j] - w[j]).abs());
            zw[j] = w_next[j] + mom * (w_next[j] - w[j]);
        }
        zb = b_next + mom * (b_next - b);
        w = w_next;
        b = b_next;
        tk = t_next;
        if delta < p.tol {
            break;
        }
    }
    (w, b)
}

/// Proximal operator of `strength * R` where `R` mixes l1 and l2 by `l1_ratio`.
fn prox(w: &mut [f64], strength: f64, penalty: Penalty, l1_ratio: f64) {
    match penalty {
        Penalty::L2 => w.iter_mut().for_each(|v| *v /= 1.0 + strength),
        Penalty::L1 => w.iter_mut().for_each(|v| *v = soft(*v, strength)),
        Penalty::ElasticNet => w.iter_mut().for_each(|v| {
            *v = soft(*v, strength * l1_ratio) / (1.0 + strength * (1.0 - l1_ratio));
        }),
    }
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

pub fn fit_logistic(x: &Matrix, y: &[usize], n_classes: usize, p: &LogisticParams) -> LinearModel {
    let scaler = Standardizer::fit(x);
    let xs = scaler.transform(x);
    let (weights, intercepts) = ovr_targets(y, n_classes)
        .iter()
        .map(|t| fit_binary_logistic(&xs, t, p))
        .unzip();
    LinearModel {
        scaler,
        weights,
        intercepts,
        n_classes,
    }
}

/// Mean logistic loss plus penalty; used by tests and diagnostics.
pub fn logistic_objective(x: &Matrix, t: &[f64], w: &[f64], b: f64, c: f64, penalty: Penalty) -> f64 {
    let n = x.rows() as f64;
    let loss = (0..x.rows())
        .map(|i| log_loss_margin(t[i] * (dot(w, x.row(i)) + b)))
        .sum::<f64>()
        / n;
    let reg = match penalty {
        Penalty::L2 => 0.5 * w.iter().map(|v| v * v).sum::<f64>(),
        _ => w.iter().map(|v| v.abs()).sum::<f64>(),
    };
    loss + reg / (c * n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgdLoss {
    Hinge,
    Perceptron,
    Log,
    SquaredHinge,
}

impl SgdLoss {
    /// Derivative of the loss with respect to the raw score `p` for label `y` in ±1.
    fn dloss(self, p: f64, y: f64) -> f64 {
        let z = p * y;
        match self {
            SgdLoss::Hinge => {
                if z <= 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            SgdLoss::Perceptron => {
                if z <= 0.0 {
                    -y
                } else {
                    0.0
                }
            }
            SgdLoss::Log => -y * sigmoid(-z),
            SgdLoss::SquaredHinge => {
                let m = 1.0 - z;
                if m > 0.0 {
                    -2.0 * y * m
                } else {
                    0.0
                }
            }
        }
    }

    fn loss(self, p: f64, y: f64) -> f64 {
        let z = p * y;
        match self {
            SgdLoss::Hinge => (1.0 - z).max(0.0),
            SgdLoss::Perceptron => (-z).max(0.0),
            SgdLoss::Log => log_loss_margin(z),
            SgdLoss::SquaredHinge => (1.0 - z).max(0.0).powi(2),
        }
    }
}

/// `const`: `eta0`; `opt`: `1 / (alpha (t0 + t))` with Bottou's `t0`;
/// `invscaling`: `eta0 / t^0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Constant,
    Optimal,
    InvScaling,
}

#[derive(Debug, Clone, Copy)]
pub struct SgdParams {
    pub loss: SgdLoss,
    pub penalty: Penalty,
    pub l1_ratio: f64,
    pub schedule: Schedule,
    pub eta0: f64,
    pub fit_intercept: bool,
    pub alpha: f64,
    pub power_t: f64,
    pub max_epochs: usize,
    pub tol: f64,
    pub n_iter_no_change: usize,
}

impl SgdParams {
    pub const ALPHA: f64 = 1e-4;
    pub const POWER_T: f64 = 0.5;
}

fn fit_binary_sgd(x: &Matrix, t: &[f64], p: &SgdParams, rng: &mut EngineRng) -> (Vec<f64>, f64) {
    let d = x.cols();
    let n = x.rows();
    let l1_ratio = match p.penalty {
        Penalty::L2 => 0.0,
        Penalty::L1 => 1.0,
        Penalty::ElasticNet => p.l1_ratio,
    };
    let t0 = {
        let typw = (1.0 / p.alpha.sqrt()).sqrt();
        let eta = typw / p.loss.dloss(-typw, 1.0).max(1.0);
        1.0 / (eta * p.alpha)
    };
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = (w.clone(), b, f64::INFINITY);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 1.0f64;
    let mut stale = 0;
    for _ in 0..p.max_epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let eta = match p.schedule {
                Schedule::Constant => p.eta0,
                Schedule::Optimal => 1.0 / (p.alpha * (t0 + step - 1.0)),
                Schedule::InvScaling => p.eta0 / step.powf(p.power_t),
            };
            let row = x.row(i);
            let score = dot(&w, row) + b;
            epoch_loss += p.loss.loss(score, t[i]);
            let g = p.loss.dloss(score, t[i]);
            let shrink = (1.0 - (1.0 - l1_ratio) * eta * p.alpha).max(0.0);
            for (wj, v) in w.iter_mut().zip(row) {
                *wj = *wj * shrink - eta * g * v;
            }
            if p.fit_intercept {
                b -= eta * g;
            }
            if l1_ratio > 0.0 {
                let th = eta * p.alpha * l1_ratio;
                w.iter_mut().for_each(|v| *v = soft(*v, th));
            }
            step += 1.0;
        }
        epoch_loss /= n as f64;
        if !epoch_loss.is_finite() || !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            // diverged; keep the best finite epoch
            return (best.0, best.1);
        }
        if epoch_loss > best.2 - p.tol {
            stale += 1;
        } else {
            stale = 0;
        }
        if epoch_loss < best.2 {
            best = (w.clone(), b, epoch_loss);
        }
        if stale >= p.n_iter_no_change {
            break;
        }
    }
    (w, b)
}

pub fn fit_sgd(x: &Matrix, y: &[usize], n_classes: usize, p: &SgdParams, rng: &mut EngineRng) -> LinearModel {
    let scaler = Standardizer::fit(x);
    let xs = scaler.transform(x);
    let (weights, intercepts) = ovr_targets(y, n_classes)
        .iter()
        .map(|t| fit_binary_sgd(&xs, t, p, rng))
        .unzip();
    LinearModel {
        scaler,
        weights,
        intercepts,
        n_classes,
    }
}
