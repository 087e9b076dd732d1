//! Pairwise relation detection: featurization, baselines, dataset
//! construction and an SVM-backed classifier.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate_binary, BinaryMetrics};
use super::svm::{svm_predict, svm_train, SvmModel, SvmParams};
use crate::dna::{dna_distance, DnaRecord};
use crate::error::{Error, Result};
use crate::extraction::{DnaStore, Manifest};
use crate::util::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Correlated,
    Independent,
}

impl Relation {
    pub fn is_correlated(self) -> bool {
        self == Relation::Correlated
    }

    /// `+1` for correlated, `-1` for independent.
    pub fn sign(self) -> i8 {
        if self.is_correlated() {
            1
        } else {
            -1
        }
    }

    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Relation::Correlated
        } else {
            Relation::Independent
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Correlated => "correlated",
            Relation::Independent => "independent",
        })
    }
}

/// An unordered pair of models with a relation label and the releasing
/// organization of each side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationPair {
    pub model_a: String,
    pub model_b: String,
    pub org_a: String,
    pub org_b: String,
    pub label: Relation,
}

impl RelationPair {
    pub fn new(
        model_a: impl Into<String>,
        model_b: impl Into<String>,
        org_a: impl Into<String>,
        org_b: impl Into<String>,
        label: Relation,
    ) -> Result<Self> {
        let pair = Self {
            model_a: model_a.into(),
            model_b: model_b.into(),
            org_a: org_a.into(),
            org_b: org_b.into(),
            label,
        };
        pair.validate()?;
        Ok(pair)
    }

    fn validate(&self) -> Result<()> {
        if self.model_a == self.model_b {
            return Err(Error::domain(format!("pair of `{}` with itself", self.model_a)));
        }
        Ok(())
    }

    /// Model ids in lexicographic order.
    pub fn key(&self) -> (&str, &str) {
        if self.model_a <= self.model_b {
            (&self.model_a, &self.model_b)
        } else {
            (&self.model_b, &self.model_a)
        }
    }
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<RelationPair>> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: source.clone(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut pairs = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in reader.deserialize::<RelationPair>().enumerate() {
        let line = i + 2;
        let parse_err = |message: String| Error::Parse {
            path: source.clone(),
            line,
            message,
        };
        let pair = row.map_err(|e| parse_err(e.to_string()))?;
        pair.validate().map_err(|e| parse_err(e.to_string()))?;
        let (a, b) = pair.key();
        if !seen.insert((a.to_string(), b.to_string())) {
            return Err(parse_err(format!("duplicate pair ({a}, {b})")));
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[RelationPair]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::domain(format!("csv: {e}")))?;
    for p in pairs {
        w.serialize(p).map_err(|e| Error::domain(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `|a - b|` elementwise followed by `||a - b||`; symmetric in its arguments.
pub fn pair_features(a: &DnaRecord, b: &DnaRecord) -> Result<Vec<f64>> {
    let dist = dna_distance(a, b)?;
    let mut f: Vec<f64> = a.vector.iter().zip(&b.vector).map(|(x, y)| (x - y).abs()).collect();
    f.push(dist);
    Ok(f)
}

/// Correlated iff both models come from the same organization.
pub fn greedy_baseline(pair: &RelationPair) -> Result<Relation> {
    if pair.org_a.trim().is_empty() || pair.org_b.trim().is_empty() {
        return Err(Error::domain(format!(
            "organization missing for pair ({}, {})",
            pair.model_a, pair.model_b
        )));
    }
    Ok(if pair.org_a == pair.org_b {
        Relation::Correlated
    } else {
        Relation::Independent
    })
}

/// A fair coin per pair, seeded by `seed` and the unordered pair.
pub fn random_baseline(pair: &RelationPair, seed: u64) -> Relation {
    let (a, b) = pair.key();
    let mut r = rng(derive_seed(seed, &format!("{}\u{0}{}", a, b)));
    if r.random_bool(0.5) {
        Relation::Correlated
    } else {
        Relation::Independent
    }
}

/// Adds as many random independent pairs as there are correlated ones.
///
/// Negatives are drawn uniformly from unordered pairs of `orgs`' models that
/// are not already listed in `correlated`.
pub fn with_negative_samples(
    correlated: &[RelationPair],
    orgs: &BTreeMap<String, String>,
    seed: u64,
) -> Result<Vec<RelationPair>> {
    let taken: BTreeSet<(String, String)> = correlated
        .iter()
        .map(|p| {
            let (a, b) = p.key();
            (a.to_string(), b.to_string())
        })
        .collect();
    let models: Vec<&String> = orgs.keys().collect();
    let mut candidates = Vec::new();
    for (i, a) in models.iter().enumerate() {
        for b in &models[i + 1..] {
            if !taken.contains(&((*a).clone(), (*b).clone())) {
                candidates.push((*a, *b));
            }
        }
    }
    let wanted = correlated.len();
    if candidates.len() < wanted {
        return Err(Error::domain(format!(
            "only {} candidate negative pairs for {wanted} correlated pairs",
            candidates.len()
        )));
    }
    let mut r = rng(derive_seed(seed, "negatives"));
    let picked = rand::seq::index::sample(&mut r, candidates.len(), wanted);
    let mut out = correlated.to_vec();
    let mut chosen: Vec<usize> = picked.into_iter().collect();
    chosen.sort_unstable();
    for k in chosen {
        let (a, b) = candidates[k];
        out.push(RelationPair::new(a, b, &orgs[a], &orgs[b], Relation::Independent)?);
    }
    Ok(out)
}

/// Seeded split keeping the class ratio in both parts; returns `(train, test)`.
pub fn stratified_split(
    pairs: &[RelationPair],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<RelationPair>, Vec<RelationPair>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::domain("test fraction must be in [0, 1)"));
    }
    let mut r = rng(derive_seed(seed, "split"));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Relation::Correlated, Relation::Independent] {
        let mut members: Vec<&RelationPair> = pairs.iter().filter(|p| p.label == class).collect();
        members.shuffle(&mut r);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test.extend(members[..n_test].iter().map(|p| (*p).clone()));
        train.extend(members[n_test..].iter().map(|p| (*p).clone()));
    }
    Ok((train, test))
}

fn lookup<'a>(store: &'a DnaStore, id: &str) -> Result<&'a DnaRecord> {
    store
        .get(id)
        .ok_or_else(|| Error::domain(format!("model `{id}` has no DNA in the store")))
}

fn features_for(store: &DnaStore, pair: &RelationPair) -> Result<Vec<f64>> {
    pair_features(lookup(store, &pair.model_a)?, lookup(store, &pair.model_b)?)
}

/// An RBF-SVM over pair features, tied to the DNA provenance it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationClassifier {
    pub svm: SvmModel,
    pub params: SvmParams,
    pub dna_provenance: Manifest,
}

impl RelationClassifier {
    pub fn train(store: &DnaStore, pairs: &[RelationPair], params: &SvmParams) -> Result<Self> {
        let features = pairs
            .iter()
            .map(|p| features_for(store, p))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<i8> = pairs.iter().map(|p| p.label.sign()).collect();
        Ok(Self {
            svm: svm_train(&features, &labels, params)?,
            params: params.clone(),
            dna_provenance: store.manifest().clone(),
        })
    }

    pub fn predict(&self, store: &DnaStore, pair: &RelationPair) -> Result<(Relation, f64)> {
        if !self.dna_provenance.compatible_with(store.manifest()) {
            return Err(Error::provenance(
                "classifier was trained on DNA with a different provenance",
            ));
        }
        let (label, score) = svm_predict(&self.svm, &features_for(store, pair)?)?;
        Ok((if label > 0 { Relation::Correlated } else { Relation::Independent }, score))
    }

    pub fn evaluate(&self, store: &DnaStore, pairs: &[RelationPair]) -> Result<BinaryMetrics> {
        let scores = pairs
            .iter()
            .map(|p| self.predict(store, p).map(|(_, s)| s))
            .collect::<Result<Vec<_>>>()?;
        evaluate_binary(&scores, &truth(pairs))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&body)?)
    }
}

fn truth(pairs: &[RelationPair]) -> Vec<bool> {
    pairs.iter().map(|p| p.label.is_correlated()).collect()
}

fn label_score(r: Relation) -> f64 {
    f64::from(r.sign())
}

pub fn evaluate_greedy(pairs: &[RelationPair]) -> Result<BinaryMetrics> {
    let scores = pairs
        .iter()
        .map(|p| greedy_baseline(p).map(label_score))
        .collect::<Result<Vec<_>>>()?;
    evaluate_binary(&scores, &truth(pairs))
}

pub fn evaluate_random(pairs: &[RelationPair], seed: u64) -> Result<BinaryMetrics> {
    let scores: Vec<f64> = pairs.iter().map(|p| label_score(random_baseline(p, seed))).collect();
    evaluate_binary(&scores, &truth(pairs))
}
