use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::RoutingExample;
use crate::error::{Error, Result};
use crate::extraction::DnaStore;
use crate::util::{derive_seed, rng};

/// How a projected query is compared with a model's DNA.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scoring {
    /// `dna . (W x)`
    #[default]
    Dot,
    /// `dna . (W x) / ||W x||`
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RouterHyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Standard deviation of the initial entries of `W`.
    pub init_std: f64,
    pub use_bias: bool,
    pub scoring: Scoring,
}

impl Default for RouterHyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 200,
            l2: 1e-4,
            batch_size: 64,
            seed: 0,
            init_std: 0.01,
            use_bias: true,
            scoring: Scoring::Dot,
        }
    }
}

impl RouterHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::domain("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch size must be at least 1"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::domain("l2 must be non-negative"));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::domain("init_std must be non-negative"));
        }
        Ok(())
    }
}

/// A linear map from query space into DNA space plus per-model biases,
/// scored against frozen unit-norm DNAs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterModel {
    pub query_dim: usize,
    pub dna_dim: usize,
    /// `dna_dim x query_dim`, row-major.
    pub w: Vec<f64>,
    pub biases: BTreeMap<String, f64>,
    /// Unit-normalized DNA per model; never updated by training.
    pub dna_index: BTreeMap<String, Vec<f64>>,
    pub hyperparams: RouterHyperparams,
    /// Fingerprint of the store the DNAs came from.
    pub dna_provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    /// Same layout as `RouterModel::w`.
    pub w: Vec<f64>,
    pub biases: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct RouterTraining {
    pub router: RouterModel,
    /// Full training loss after each epoch.
    pub loss_history: Vec<f64>,
    pub warnings: Vec<String>,
}

/// `ln(1 + e^s)` without overflow.
fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

pub fn unit_normalize(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

struct Projected {
    /// `W x`, or its unit direction under cosine scoring.
    v: Vec<f64>,
    norm: f64,
}

impl RouterModel {
    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.dna_index.keys().map(String::as_str)
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.query_dim {
            return Err(Error::DimensionMismatch {
                context: "query embedding",
                expected: self.query_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn project(&self, x: &[f64]) -> Projected {
        let q = self.query_dim;
        let u: Vec<f64> = (0..self.dna_dim)
            .map(|r| self.w[r * q..(r + 1) * q].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        match self.hyperparams.scoring {
            Scoring::Dot => Projected { v: u, norm: 1.0 },
            Scoring::Cosine => {
                let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
                let v = if norm > 0.0 {
                    u.iter().map(|a| a / norm).collect()
                } else {
                    vec![0.0; u.len()]
                };
                Projected { v, norm }
            }
        }
    }

    fn score_with(&self, p: &Projected, model: &str) -> f64 {
        let dna = &self.dna_index[model];
        let b = if self.hyperparams.use_bias {
            self.biases[model]
        } else {
            0.0
        };
        dna.iter().zip(&p.v).map(|(a, b)| a * b).sum::<f64>() + b
    }

    /// Score of every model for a query, in model-id order.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<(String, f64)>> {
        self.check_query(x)?;
        let p = self.project(x);
        Ok(self.models().map(|m| (m.to_string(), self.score_with(&p, m))).collect())
    }

    /// Highest-scoring model; ties go to the smallest model id.
    pub fn route(&self, x: &[f64]) -> Result<&str> {
        self.check_query(x)?;
        let p = self.project(x);
        let mut best: Option<(&str, f64)> = None;
        for m in self.models() {
            let s = self.score_with(&p, m);
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((m, s));
            }
        }
        best.map(|(m, _)| m).ok_or_else(|| Error::domain("router has no models"))
    }

    /// Mean binary cross-entropy over every (query, model) outcome in `batch`
    /// plus `l2 / 2 * ||W||^2`, and its gradient.
    pub fn loss_and_gradient(&self, batch: &[RoutingExample]) -> Result<LossGradient> {
        let refs: Vec<&RoutingExample> = batch.iter().collect();
        self.objective(&refs, true)
    }

    pub fn loss(&self, batch: &[RoutingExample]) -> Result<f64> {
        let refs: Vec<&RoutingExample> = batch.iter().collect();
        Ok(self.objective(&refs, false)?.loss)
    }

    fn objective(&self, batch: &[&RoutingExample], want_grad: bool) -> Result<LossGradient> {
        let (l, q) = (self.dna_dim, self.query_dim);
        let mut loss = 0.0;
        let mut gw = if want_grad { vec![0.0; l * q] } else { Vec::new() };
        let mut gb: BTreeMap<String, f64> = self.models().map(|m| (m.to_string(), 0.0)).collect();
        let mut cells = 0usize;
        for ex in batch {
            self.check_query(&ex.embedding)?;
            let p = self.project(&ex.embedding);
            let mut dv = vec![0.0; l];
            for (m, &y) in &ex.outcomes {
                let dna = self
                    .dna_index
                    .get(m)
                    .ok_or_else(|| Error::domain(format!("router has no DNA for `{m}`")))?;
                let y = f64::from(y);
                let s = self.score_with(&p, m);
                loss += softplus(s) - y * s;
                cells += 1;
                if want_grad {
                    let g = sigmoid(s) - y;
                    for (d, t) in dv.iter_mut().zip(dna) {
                        *d += g * t;
                    }
                    *gb.get_mut(m).unwrap() += g;
                }
            }
            if want_grad {
                let du = match self.hyperparams.scoring {
                    Scoring::Dot => dv,
                    Scoring::Cosine if p.norm > 0.0 => {
                        let along: f64 = p.v.iter().zip(&dv).map(|(a, b)| a * b).sum();
                        dv.iter().zip(&p.v).map(|(d, v)| (d - v * along) / p.norm).collect()
                    }
                    Scoring::Cosine => vec![0.0; l],
                };
                for r in 0..l {
                    let row = &mut gw[r * q..(r + 1) * q];
                    for (g, x) in row.iter_mut().zip(&ex.embedding) {
                        *g += du[r] * x;
                    }
                }
            }
        }
        if cells == 0 {
            return Err(Error::domain("batch has no outcomes"));
        }
        let n = cells as f64;
        let reg: f64 = self.w.iter().map(|w| w * w).sum();
        loss = loss / n + 0.5 * self.hyperparams.l2 * reg;
        if want_grad {
            for (g, w) in gw.iter_mut().zip(&self.w) {
                *g = *g / n + self.hyperparams.l2 * w;
            }
            for g in gb.values_mut() {
                *g = if self.hyperparams.use_bias { *g / n } else { 0.0 };
            }
        }
        Ok(LossGradient { loss, w: gw, biases: gb })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let r: RouterModel = serde_json::from_str(&body)?;
        if r.w.len() != r.dna_dim * r.query_dim || r.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!("{}: malformed weight matrix", path.display())));
        }
        if r.dna_index.values().any(|v| v.len() != r.dna_dim) || r.dna_index.keys().any(|k| !r.biases.contains_key(k)) {
            return Err(Error::domain(format!("{}: inconsistent model tables", path.display())));
        }
        Ok(r)
    }
}

fn check_examples(examples: &[RoutingExample]) -> Result<usize> {
    let first = examples.first().ok_or_else(|| Error::domain("no routing examples"))?;
    let q = first.embedding.len();
    for ex in examples {
        ex.validate()?;
        if ex.embedding.len() != q {
            return Err(Error::DimensionMismatch {
                context: "query embedding",
                expected: q,
                actual: ex.embedding.len(),
            });
        }
    }
    Ok(q)
}

/// Trains a router over every model that appears in `train`'s outcomes,
/// using mini-batch gradient descent with the DNAs held fixed.
pub fn train_router(store: &DnaStore, train: &[RoutingExample], hp: &RouterHyperparams) -> Result<RouterTraining> {
    hp.validate()?;
    let q = check_examples(train)?;
    let models: BTreeSet<&str> = train.iter().flat_map(|e| e.outcomes.keys().map(String::as_str)).collect();
    let mut dna_index = BTreeMap::new();
    for m in &models {
        let rec = store
            .get(m)
            .ok_or_else(|| Error::domain(format!("model `{m}` has no DNA in the store")))?;
        let unit = unit_normalize(&rec.vector).ok_or_else(|| Error::domain(format!("DNA of `{m}` is zero")))?;
        dna_index.insert(m.to_string(), unit);
    }
    let l = store.manifest().projection.dna_dim;

    let mut warnings = Vec::new();
    let positives = train.iter().flat_map(|e| e.outcomes.values()).filter(|&&v| v == 1).count();
    let total: usize = train.iter().map(|e| e.outcomes.len()).sum();
    if positives == 0 || positives == total {
        let msg = format!("all {total} training outcomes are {}", if positives == 0 { 0 } else { 1 });
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let normal = Normal::new(0.0, hp.init_std).map_err(|e| Error::domain(e.to_string()))?;
    let mut init = rng(derive_seed(hp.seed, "router-init"));
    let w: Vec<f64> = (0..l * q).map(|_| normal.sample(&mut init)).collect();
    let mut router = RouterModel {
        query_dim: q,
        dna_dim: l,
        w,
        biases: models.iter().map(|m| (m.to_string(), 0.0)).collect(),
        dna_index,
        hyperparams: hp.clone(),
        dna_provenance: store.fingerprint(),
    };

    let mut shuffle = rng(derive_seed(hp.seed, "router-shuffle"));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let all: Vec<&RoutingExample> = train.iter().collect();
    let mut loss_history = Vec::with_capacity(hp.epochs);
    let mut prev = router.objective(&all, false)?.loss;
    let mut diverged = false;
    for epoch in 0..hp.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<&RoutingExample> = chunk.iter().map(|&i| &train[i]).collect();
            let g = router.objective(&batch, true)?;
            for (w, gw) in router.w.iter_mut().zip(&g.w) {
                *w -= hp.learning_rate * gw;
            }
            for (m, gb) in &g.biases {
                *router.biases.get_mut(m).unwrap() -= hp.learning_rate * gb;
            }
        }
        let loss = router.objective(&all, false)?.loss;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {}", epoch + 1)));
        }
        if loss > prev && !diverged {
            diverged = true;
            let msg = format!("training loss rose at epoch {} ({prev:.6} -> {loss:.6})", epoch + 1);
            log::warn!("{msg}");
            warnings.push(msg);
        }
        prev = loss;
        loss_history.push(loss);
    }
    Ok(RouterTraining {
        router,
        loss_history,
        warnings,
    })
}

/// Fraction of queries whose routed model answered correctly.
pub fn routing_accuracy(router: &RouterModel, test: &[RoutingExample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::domain("no test examples"));
    }
    let hits = test
        .par_iter()
        .map(|ex| router.route(&ex.embedding).map(|m| usize::from(ex.correct(m))))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / test.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleBest {
    pub model_id: String,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

fn accuracy_of(model: &str, examples: &[RoutingExample]) -> f64 {
    examples.iter().filter(|e| e.correct(model)).count() as f64 / examples.len() as f64
}

/// The model with the best training accuracy (ties to the smallest id) and
/// its accuracy on `test`.
pub fn single_best_baseline(train: &[RoutingExample], test: &[RoutingExample]) -> Result<SingleBest> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::domain("single-best baseline needs train and test examples"));
    }
    let models: BTreeSet<&str> = train.iter().flat_map(|e| e.outcomes.keys().map(String::as_str)).collect();
    let mut best: Option<(&str, f64)> = None;
    for m in models {
        let acc = accuracy_of(m, train);
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((m, acc));
        }
    }
    let (model, train_accuracy) = best.ok_or_else(|| Error::domain("training data has no outcomes"))?;
    Ok(SingleBest {
        model_id: model.to_string(),
        train_accuracy,
        test_accuracy: accuracy_of(model, test),
    })
}

/// Accuracy of routing every query to a uniformly random model.
pub fn random_router_accuracy(test: &[RoutingExample], models: &[String], seed: u64) -> Result<f64> {
    if test.is_empty() || models.is_empty() {
        return Err(Error::domain("random router needs examples and models"));
    }
    let mut r = rng(derive_seed(seed, "random-router"));
    let hits = test
        .iter()
        .filter(|e| e.correct(&models[r.random_range(0..models.len())]))
        .count();
    Ok(hits as f64 / test.len() as f64)
}

/// Expected accuracy of the uniform random router: mean per-model correctness.
pub fn expected_random_accuracy(test: &[RoutingExample], models: &[String]) -> Result<f64> {
    if test.is_empty() || models.is_empty() {
        return Err(Error::domain("random router needs examples and models"));
    }
    let per_model: HashMap<&str, f64> = models.iter().map(|m| (m.as_str(), accuracy_of(m, test))).collect();
    Ok(per_model.values().sum::<f64>() / models.len() as f64)
}
