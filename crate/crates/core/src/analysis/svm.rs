//! Soft-margin kernel SVM trained by Sequential Minimal Optimization.
//!
//! The dual problem is
//!
//! ```text
//! min_a  1/2 a'Qa - e'a   s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Each step picks the maximal violating pair (i in I_up maximizing -y G,
//! j in I_low minimizing it), solves the two-variable subproblem in closed
//! form, clips to the box, and updates the gradient. Training stops once the
//! violation gap `m - M` drops below `tol`.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::rng;

const TAU: f64 = 1e-12;

/// RBF kernel width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    /// `1 / (n_features * Var(X))`, variance over all feature entries.
    Scale,
    Value(f64),
}

impl Gamma {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "scale" {
            return Ok(Gamma::Scale);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::domain(format!("gamma must be `scale` or a number, got `{s}`")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain("gamma must be positive"));
        }
        Ok(Gamma::Value(v))
    }

    pub fn resolve(&self, features: &[Vec<f64>]) -> f64 {
        match *self {
            Gamma::Value(g) => g,
            Gamma::Scale => {
                let d = features.first().map_or(1, Vec::len).max(1);
                let n = (features.len() * d) as f64;
                let mean = features.iter().flatten().sum::<f64>() / n;
                let var = features.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    1.0 / (d as f64 * var)
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    pub tol: f64,
    pub seed: u64,
    /// Kernel rows kept in memory.
    pub cache_rows: usize,
    pub max_iter: Option<usize>,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: Gamma::Scale,
            tol: 1e-3,
            seed: 0,
            cache_rows: 4096,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub n_features: usize,
    /// Final violation gap `m - M`.
    pub gap: f64,
    pub iterations: usize,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

struct KernelCache<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    rows: HashMap<usize, Vec<f64>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64, capacity: usize) -> Self {
        Self {
            x,
            gamma,
            rows: HashMap::new(),
            order: VecDeque::new(),
            capacity: capacity.max(2),
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if !self.rows.contains_key(&i) {
            if self.rows.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.rows.remove(&old);
                }
            }
            let xi = &self.x[i];
            let row = self.x.iter().map(|xk| rbf(xi, xk, self.gamma)).collect();
            self.rows.insert(i, row);
            self.order.push_back(i);
        }
        &self.rows[&i]
    }
}

fn validate(features: &[Vec<f64>], labels: &[i8]) -> Result<usize> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "svm labels",
            expected: features.len(),
            actual: labels.len(),
        });
    }
    let d = features.first().map(Vec::len).ok_or_else(|| Error::domain("no training examples"))?;
    for f in features {
        if f.len() != d {
            return Err(Error::DimensionMismatch {
                context: "svm features",
                expected: d,
                actual: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("svm features".into()));
        }
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::domain("labels must be +1 or -1"));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::domain("training data must contain both classes"));
    }
    Ok(d)
}

/// Trains a soft-margin RBF SVM; labels are `+1` / `-1`.
pub fn svm_train(features: &[Vec<f64>], labels: &[i8], params: &SvmParams) -> Result<SvmModel> {
    let d = validate(features, labels)?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::domain("C must be positive"));
    }
    if !(params.tol > 0.0) {
        return Err(Error::domain("tol must be positive"));
    }
    let gamma = params.gamma.resolve(features);
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain("gamma must be positive"));
    }
    let n = features.len();
    let c = params.c;
    let y: Vec<f64> = labels.iter().map(|&v| f64::from(v)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut cache = KernelCache::new(features, gamma, params.cache_rows);
    // seeded scan order decides ties between equally violating indices
    let mut scan: Vec<usize> = (0..n).collect();
    scan.shuffle(&mut rng(params.seed));

    let max_iter = params.max_iter.unwrap_or_else(|| (100 * n).max(10_000_000));
    let mut iterations = 0;
    let mut gap;
    loop {
        let (mut i, mut m) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut big_m) = (usize::MAX, f64::INFINITY);
        for &t in &scan {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_up && v > m {
                m = v;
                i = t;
            }
            if in_low && v < big_m {
                big_m = v;
                j = t;
            }
        }
        gap = m - big_m;
        if i == usize::MAX || j == usize::MAX || gap < params.tol {
            break;
        }
        if iterations >= max_iter {
            log::warn!("SMO stopped after {iterations} iterations with gap {gap:.3e}");
            break;
        }
        iterations += 1;

        let k_ij = cache.row(i)[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k_ij;
        if y[i] != y[j] {
            let quad = (2.0 + 2.0 * q_ij).max(TAU);
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
            let quad = (2.0 - 2.0 * q_ij).max(TAU);
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
        let row_i = cache.row(i).to_vec();
        let row_j = cache.row(j);
        for k in 0..n {
            grad[k] += y[k] * (y[i] * row_i[k] * di + y[j] * row_j[k] * dj);
        }
    }

    // bias: mean over free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
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
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(features[t].clone());
            dual_coef.push(alpha[t] * y[t]);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coef,
        bias: -rho,
        gamma,
        c,
        n_features: d,
        gap: gap.max(0.0),
        iterations,
    })
}

impl SvmModel {
    /// `sum_i coef_i K(sv_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                context: "svm input",
                expected: self.n_features,
                actual: x.len(),
            });
        }
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf(sv, x, self.gamma))
            .sum();
        Ok(s + self.bias)
    }
}

/// Label (`sign(score)`, zero mapped to `+1`) and raw decision score.
pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<(i8, f64)> {
    let score = model.decision(x)?;
    Ok((if score >= 0.0 { 1 } else { -1 }, score))
}
