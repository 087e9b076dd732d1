use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::DistanceMatrix;
use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MantelResult {
    /// Pearson correlation over the upper triangles.
    pub r: f64,
    /// One-sided permutation p-value, `(1 + #{r_perm >= r}) / (P + 1)`.
    pub p_value: f64,
    pub permutations: usize,
    pub seed: u64,
    /// Number of label pairs compared.
    pub pairs: usize,
}

/// Pearson correlation of two equal-length samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "pearson",
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::domain("pearson needs at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::domain("correlation undefined for a constant sample"));
    }
    // sqrt(s * s) == s exactly, so identical inputs give exactly 1
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Mantel permutation test between two distance matrices over the same labels.
///
/// Both matrices are first put in lexicographic label order, so relabeling
/// both by the same permutation leaves the result unchanged. Permutations
/// shuffle the labels of `b` (rows and columns together); each permutation
/// draws from its own stream derived from `seed`.
pub fn mantel_test(
    a: &DistanceMatrix,
    b: &DistanceMatrix,
    permutations: usize,
    seed: u64,
) -> Result<MantelResult> {
    if permutations < 99 {
        return Err(Error::domain("at least 99 permutations are required"));
    }
    if a.len() < 4 {
        return Err(Error::domain("the Mantel test needs at least 4 labels"));
    }
    let a = a.sorted();
    let b = b.sorted();
    if a.labels() != b.labels() {
        return Err(Error::domain("distance matrices have different labels"));
    }
    let n = a.len();
    let x = a.upper_triangle();
    let r = pearson(&x, &b.upper_triangle())?;

    let hits: usize = (0..permutations)
        .into_par_iter()
        .map(|k| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng(derive_seed(seed, &format!("mantel-{k}"))));
            let mut y = Vec::with_capacity(x.len());
            for i in 0..n {
                for j in i + 1..n {
                    y.push(b.get(order[i], order[j]));
                }
            }
            // A constant permuted sample cannot happen: b's entries are a
            // permutation of a non-constant multiset.
            let rp = pearson(&x, &y).unwrap_or(f64::NEG_INFINITY);
            usize::from(rp >= r)
        })
        .sum();

    Ok(MantelResult {
        r,
        p_value: (1 + hits) as f64 / (permutations + 1) as f64,
        permutations,
        seed,
        pairs: x.len(),
    })
}
