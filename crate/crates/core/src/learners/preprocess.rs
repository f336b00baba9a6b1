use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Per-column z-scoring fitted on training rows. Constant columns get
/// unit scale so they map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows().max(1) as f64;
        let mut mean = vec![0.0; x.cols()];
        let mut scale = vec![0.0; x.cols()];
        for j in 0..x.cols() {
            let m = (0..x.rows()).map(|i| x.get(i, j)).sum::<f64>() / n;
            let v = (0..x.rows()).map(|i| (x.get(i, j) - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            scale[j] = if v > 1e-24 { v.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            row.iter()
                .zip(self.mean.iter().zip(&self.scale))
                .map(|(v, (m, s))| (v - m) / s),
        );
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut data = Vec::with_capacity(x.rows() * x.cols());
        let mut buf = Vec::with_capacity(x.cols());
        for i in 0..x.rows() {
            self.transform_row(x.row(i), &mut buf);
            data.extend_from_slice(&buf);
        }
        Matrix::new(x.rows(), x.cols(), data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeStrategy {
    Mean,
    Median,
    Mode,
}

impl ImputeStrategy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Self::Mean),
            "median" => Some(Self::Median),
            "mode" => Some(Self::Mode),
            _ => None,
        }
    }
}

/// Column fill values learned from training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub strategy: ImputeStrategy,
    pub fill: Vec<f64>,
}

impl Imputer {
    pub fn fit(x: &Matrix, strategy: ImputeStrategy) -> Self {
        let fill = (0..x.cols())
            .map(|j| {
                let mut vals: Vec<f64> = x.column(j).into_iter().filter(|v| !v.is_nan()).collect();
                if vals.is_empty() {
                    return 0.0;
                }
                match strategy {
                    ImputeStrategy::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
                    ImputeStrategy::Median => median(&mut vals),
                    ImputeStrategy::Mode => mode(&mut vals),
                }
            })
            .collect();
        Self { strategy, fill }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        if !x.has_missing() {
            return x.clone();
        }
        let mut out = x.clone();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                if x.get(i, j).is_nan() {
                    out.set(i, j, self.fill[j]);
                }
            }
        }
        out
    }
}

pub fn median(vals: &mut [f64]) -> f64 {
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        (vals[n / 2 - 1] + vals[n / 2]) / 2.0
    }
}

/// Most frequent value; ties resolve to the smallest value.
fn mode(vals: &mut [f64]) -> f64 {
    vals.sort_by(f64::total_cmp);
    let (mut best, mut best_n) = (vals[0], 0);
    let mut i = 0;
    while i < vals.len() {
        let mut j = i;
        while j < vals.len() && vals[j] == vals[i] {
            j += 1;
        }
        if j - i > best_n {
            best = vals[i];
            best_n = j - i;
        }
        i = j;
    }
    best
}
