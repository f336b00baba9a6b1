//! Kernel SVM trained with an SMO dual solver (maximal-violating-pair
//! selection with second-order working-set choice), one-vs-rest for
//! multiclass problems.

use serde::{Deserialize, Serialize};

use super::linear::ovr_targets;
use super::preprocess::Standardizer;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Rbf { gamma: f64 },
    Poly { gamma: f64, coef0: f64, degree: i32 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Poly { gamma, coef0, degree } => {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (gamma * d + coef0).powi(degree)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

/// Binary decision function `Σ coef_i K(sv_i, x) - rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinarySvm {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * kernel.eval(sv, x))
            .sum::<f64>()
            - self.rho
    }
}

/// Solves `min ½ αᵀQα - eᵀα` s.t. `yᵀα = 0`, `0 ≤ α ≤ C`, with
/// `Q_ij = y_i y_j K_ij`. Stops when the maximal KKT violation
/// `m(α) - M(α)` drops below `tol`.
pub fn smo(gram: &[f64], y: &[f64], p: &SmoParams) -> (Vec<f64>, f64, usize, bool) {
    const TAU: f64 = 1e-12;
    let n = y.len();
    let k = |i: usize, j: usize| gram[i * n + j];
    let c = p.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let is_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iter = 0;
    let mut converged = false;
    while iter < p.max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if is_up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            if !is_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i_sel == usize::MAX {
                continue;
            }
            let b = gmax - v;
            if b > 0.0 {
                let mut a = k(i_sel, i_sel) + k(t, t) - 2.0 * k(i_sel, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = t;
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < p.tol {
            converged = true;
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k(i, j);
        if y[i] != y[j] {
            let mut quad = k(i, i) + k(j, j) + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = k(i, i) + k(j, j) - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[i] * y[t] * k(i, t) * di + y[j] * y[t] * k(j, t) * dj;
        }
        iter += 1;
    }

    // rho from free support vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    (alpha, rho, iter, converged)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub scaler: Standardizer,
    pub kernel: Kernel,
    pub machines: Vec<BinarySvm>,
    pub n_classes: usize,
}

impl SvmModel {
    pub fn decision(&self, row: &[f64], buf: &mut Vec<f64>) -> Vec<f64> {
        self.scaler.transform_row(row, buf);
        let s: Vec<f64> = self
            .machines
            .iter()
            .map(|m| m.decision(&self.kernel, buf))
            .collect();
        if self.n_classes == 2 {
            vec![-s[0], s[0]]
        } else {
            s
        }
    }
}

pub fn fit_svm(x: &Matrix, y: &[usize], n_classes: usize, kernel: Kernel, p: &SmoParams) -> SvmModel {
    let scaler = Standardizer::fit(x);
    let xs = scaler.transform(x);
    let n = xs.rows();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(xs.row(i), xs.row(j));
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    let machines = ovr_targets(y, n_classes)
        .iter()
        .map(|t| {
            let (alpha, rho, iterations, converged) = smo(&gram, t, p);
            let mut support = Vec::new();
            let mut coef = Vec::new();
            for i in 0..n {
                if alpha[i] > 0.0 {
                    support.push(xs.row(i).to_vec());
                    coef.push(alpha[i] * t[i]);
                }
            }
            BinarySvm {
                support,
                coef,
                rho,
                iterations,
                converged,
            }
        })
        .collect();
    SvmModel {
        scaler,
        kernel,
        machines,
        n_classes,
    }
}
