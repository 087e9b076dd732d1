use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::dna::{functional_distance, jl_dimension, sample_projection, FunctionalRepresentation, ProjectionSpec};
use crate::error::{Error, Result};
use crate::util::{derive_seed, euclidean, rng};

use super::families::SYNTHETIC_EMBEDDER;

/// Ratios `d_dna / d_functional` over all pairs of a population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    pub pairs: usize,
    /// Pairs at functional distance zero, excluded from the ratios.
    pub coincident: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Pairs with a ratio below `c1`.
    pub below: usize,
    /// Pairs with a ratio above `c2`.
    pub above: usize,
}

impl DistortionReport {
    pub fn violations(&self) -> usize {
        self.below + self.above
    }
}

pub fn distortion_report(
    reps: &[FunctionalRepresentation],
    spec: &ProjectionSpec,
    alpha: f64,
    c1: f64,
    c2: f64,
) -> Result<DistortionReport> {
    if reps.len() < 2 {
        return Err(Error::domain("distortion needs at least two representations"));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain("alpha must be positive"));
    }
    let matrix = sample_projection(spec)?;
    let dnas = reps
        .iter()
        .map(|r| Ok(matrix.apply(&r.values)?.into_iter().map(|v| alpha * v).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut report = DistortionReport {
        pairs: 0,
        coincident: 0,
        min_ratio: f64::INFINITY,
        max_ratio: f64::NEG_INFINITY,
        mean_ratio: 0.0,
        below: 0,
        above: 0,
    };
    let mut sum = 0.0;
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            report.pairs += 1;
            let dh = functional_distance(&reps[i], &reps[j])?;
            if dh == 0.0 {
                report.coincident += 1;
                continue;
            }
            let ratio = euclidean(&dnas[i], &dnas[j]) / dh;
            report.min_ratio = report.min_ratio.min(ratio);
            report.max_ratio = report.max_ratio.max(ratio);
            sum += ratio;
            if ratio < c1 {
                report.below += 1;
            }
            if ratio > c2 {
                report.above += 1;
            }
        }
    }
    let measured = report.pairs - report.coincident;
    if measured > 0 {
        report.mean_ratio = sum / measured as f64;
    } else {
        report.min_ratio = f64::NAN;
        report.max_ratio = f64::NAN;
        report.mean_ratio = f64::NAN;
    }
    Ok(report)
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionExperiment {
    pub k: usize,
    pub source_dim: usize,
    pub epsilon: f64,
    pub dna_dim: usize,
    pub trials: usize,
    /// Trials with every pair inside `[(1 - eps) d, (1 + eps) d]`.
    pub successes: usize,
    pub success_rate: f64,
    /// 95% Wilson interval on the success rate.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Largest `|ratio - 1|` seen in any trial.
    pub worst_deviation: f64,
    pub violations_per_trial: Vec<usize>,
}

/// Projects `k` standard Gaussian representations of dimension `source_dim`
/// to `jl_dimension(epsilon, k)` with `alpha = 1`, once per seed, and counts
/// the seeds where no pair leaves the `1 +/- epsilon` band.
pub fn distortion_experiment(
    k: usize,
    source_dim: usize,
    epsilon: f64,
    seeds: usize,
    base_seed: u64,
) -> Result<DistortionExperiment> {
    let dna_dim = jl_dimension(epsilon, k)?;
    if dna_dim > source_dim {
        return Err(Error::domain(format!(
            "target dimension {dna_dim} exceeds source dimension {source_dim}"
        )));
    }
    if seeds == 0 {
        return Err(Error::domain("need at least one seed"));
    }
    let (mut successes, mut worst) = (0, 0.0f64);
    let mut violations_per_trial = Vec::with_capacity(seeds);
    for s in 0..seeds {
        let mut r = rng(derive_seed(base_seed, &format!("distortion-reps-{s}")));
        let reps = (0..k)
            .map(|i| {
                let values: Vec<f64> = (0..source_dim).map(|_| StandardNormal.sample(&mut r)).collect();
                FunctionalRepresentation::new(format!("r{i}"), SYNTHETIC_EMBEDDER, "distortion", source_dim, 1, values)
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = ProjectionSpec::gaussian(derive_seed(base_seed, &format!("distortion-proj-{s}")), dna_dim, source_dim)?;
        let report = distortion_report(&reps, &spec, 1.0, 1.0 - epsilon, 1.0 + epsilon)?;
        worst = worst.max((report.min_ratio - 1.0).abs()).max((report.max_ratio - 1.0).abs());
        if report.violations() == 0 {
            successes += 1;
        }
        violations_per_trial.push(report.violations());
    }
    let (ci_low, ci_high) = wilson_interval(successes, seeds, 1.959963984540054);
    Ok(DistortionExperiment {
        k,
        source_dim,
        epsilon,
        dna_dim,
        trials: seeds,
        successes,
        success_rate: successes as f64 / seeds as f64,
        ci_low,
        ci_high,
        worst_deviation: worst,
        violations_per_trial,
    })
}
