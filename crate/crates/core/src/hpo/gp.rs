//! Gaussian-process regression with a squared-exponential ARD kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::rng::EngineRng;

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyper {
    pub length_scales: Vec<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl GpHyper {
    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| ((x - y) / l).powi(2))
            .sum();
        self.signal_var * (-0.5 * d2).exp()
    }
}

/// Posterior of a zero-noise-floor GP with constant prior mean.
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    prior_mean: f64,
    hyper: GpHyper,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn gram(x: &[Vec<f64>], h: &GpHyper) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| h.kernel(&x[i], &x[j]) + if i == j { h.noise_var } else { 0.0 })
}

impl GaussianProcess {
    /// `None` when the Gram matrix is not numerically positive definite.
    pub fn fit(x: &[Vec<f64>], y: &[f64], prior_mean: f64, hyper: GpHyper) -> Option<Self> {
        let chol = Cholesky::new(gram(x, &hyper))?;
        let r = DVector::from_iterator(y.len(), y.iter().map(|v| v - prior_mean));
        let alpha = chol.solve(&r);
        Some(Self {
            x: x.to_vec(),
            prior_mean,
            hyper,
            chol,
            alpha,
        })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    /// Posterior mean and variance at `q`.
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| self.hyper.kernel(xi, q)));
        let mean = self.prior_mean + k.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&k).expect("triangular factor");
        let var = (self.hyper.kernel(q, q) - v.dot(&v)).max(0.0);
        (mean, var)
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.x.len() as f64;
        let r: f64 = self.alpha.dot(&(gram(&self.x, &self.hyper) * &self.alpha));
        let log_det: f64 = self.chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        -0.5 * r - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

fn lml(x: &[Vec<f64>], y: &[f64], h: GpHyper) -> f64 {
    GaussianProcess::fit(x, y, 0.0, h).map_or(f64::NEG_INFINITY, |g| g.log_marginal_likelihood())
}

const LOG_LS: (f64, f64) = (-4.6, 2.3);
const LOG_SF2: (f64, f64) = (-3.0, 3.0);

/// Maximizes the marginal likelihood of standardized targets `y` over
/// log length scales and log signal variance by bounded multi-start
/// pattern search.
pub fn fit_hyper(x: &[Vec<f64>], y: &[f64], noise_var: f64, starts: usize, rng: &mut EngineRng) -> GpHyper {
    let d = x.first().map_or(0, Vec::len);
    let bounds: Vec<(f64, f64)> = std::iter::repeat_n(LOG_LS, d).chain([LOG_SF2]).collect();
    let to_hyper = |theta: &[f64]| GpHyper {
        length_scales: theta[..d].iter().map(|t| t.exp()).collect(),
        signal_var: theta[d].exp(),
        noise_var,
    };
    let score = |theta: &[f64]| lml(x, y, to_hyper(theta));

    let mut best_theta: Vec<f64> = std::iter::repeat_n((0.3f64).ln(), d).chain([0.0]).collect();
    let mut best = score(&best_theta);
    for s in 0..starts.max(1) {
        let mut theta: Vec<f64> = if s == 0 {
            best_theta.clone()
        } else {
            bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect()
        };
        let mut f = score(&theta);
        let mut step = 1.0;
        while step > 0.05 {
            let mut moved = false;
            for i in 0..theta.len() {
                for dir in [1.0, -1.0] {
                    let mut cand = theta.clone();
                    cand[i] = (cand[i] + dir * step).clamp(bounds[i].0, bounds[i].1);
                    if cand[i] == theta[i] {
                        continue;
                    }
                    let fc = score(&cand);
                    if fc > f {
                        theta = cand;
                        f = fc;
                        moved = true;
                    }
                }
            }
            if !moved {
                step /= 2.0;
            }
        }
        if f > best {
            best = f;
            best_theta = theta;
        }
    }
    to_hyper(&best_theta)
}
