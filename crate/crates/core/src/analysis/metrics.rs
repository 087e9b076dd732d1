//! Binary classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// `None` when the truth has a single class.
    pub auc: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Thresholds `scores` at zero (`>= 0` is positive) and compares with `truth`.
///
/// Precision with no predicted positives and recall with no true positives
/// are reported as 0.
pub fn evaluate_binary(scores: &[f64], truth: &[bool]) -> Result<BinaryMetrics> {
    check(scores, truth)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &t) in scores.iter().zip(truth) {
        match (s >= 0.0, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(BinaryMetrics {
        precision,
        recall,
        f1,
        accuracy: ratio(tp + tn, scores.len()),
        auc: auc(scores, truth).ok(),
        tp,
        fp,
        tn,
        fn_,
    })
}

/// Area under the ROC curve via the Mann–Whitney rank statistic, ties
/// sharing their average rank.
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check(scores, truth)?;
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::domain("AUC is undefined when truth has a single class"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        // ranks start..end (1-based) share their mean
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        rank_sum += mean_rank * idx[start..end].iter().filter(|&&i| truth[i]).count() as f64;
        start = end;
    }
    let (pos, neg) = (pos as f64, neg as f64);
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

fn check(scores: &[f64], truth: &[bool]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::domain("no predictions to evaluate"));
    }
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "scores vs truth",
            expected: truth.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    Ok(())
}
