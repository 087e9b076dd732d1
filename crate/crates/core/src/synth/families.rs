use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dna::FunctionalRepresentation;
use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

pub const SYNTHETIC_EMBEDDER: &str = "synthetic";

/// Parameters of a population of model families in representation space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFamilySpec {
    pub seed: u64,
    pub n_families: usize,
    pub per_family: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of family centroids.
    pub centroid_scale: f64,
    /// Per-coordinate standard deviation of members around their centroid.
    pub within_noise: f64,
    /// Require `within_noise < centroid_scale`.
    #[serde(default)]
    pub separable: bool,
}

impl SyntheticFamilySpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_families == 0 || self.per_family == 0 || self.dim == 0 {
            return Err(Error::domain("family counts and dimension must be positive"));
        }
        if !(self.centroid_scale > 0.0 && self.centroid_scale.is_finite()) {
            return Err(Error::domain("centroid_scale must be positive"));
        }
        if !(self.within_noise >= 0.0 && self.within_noise.is_finite()) {
            return Err(Error::domain("within_noise must be non-negative"));
        }
        if self.separable && self.within_noise >= self.centroid_scale {
            return Err(Error::domain("separable families need within_noise < centroid_scale"));
        }
        Ok(())
    }

    pub fn prompt_set_hash(&self) -> String {
        format!("synthetic-{}", self.seed)
    }

    pub fn model_id(family: usize, member: usize) -> String {
        format!("f{family:02}-m{member:02}")
    }
}

/// Members of every family, family by family, with their family index.
///
/// Centroids are `N(0, centroid_scale^2)` per coordinate; members add
/// `N(0, within_noise^2)` noise. Each representation is a single block of
/// `dim` entries.
pub fn make_family_representations(
    spec: &SyntheticFamilySpec,
) -> Result<(Vec<FunctionalRepresentation>, Vec<usize>)> {
    spec.validate()?;
    let hash = spec.prompt_set_hash();
    let centroid_dist = Normal::new(0.0, spec.centroid_scale).map_err(|e| Error::domain(e.to_string()))?;
    let noise = Normal::new(0.0, spec.within_noise).map_err(|e| Error::domain(e.to_string()))?;
    let mut reps = Vec::with_capacity(spec.n_families * spec.per_family);
    let mut labels = Vec::with_capacity(reps.capacity());
    for f in 0..spec.n_families {
        let mut r = rng(derive_seed(spec.seed, &format!("centroid-{f}")));
        let centroid: Vec<f64> = (0..spec.dim).map(|_| centroid_dist.sample(&mut r)).collect();
        for m in 0..spec.per_family {
            let mut r = rng(derive_seed(spec.seed, &format!("member-{f}-{m}")));
            let values = centroid.iter().map(|c| c + noise.sample(&mut r)).collect();
            let id = SyntheticFamilySpec::model_id(f, m);
            reps.push(FunctionalRepresentation::new(id, SYNTHETIC_EMBEDDER, &hash, spec.dim, 1, values)?);
            labels.push(f);
        }
    }
    Ok((reps, labels))
}

/// Adds `N(0, sigma^2)` noise to every coordinate.
pub fn perturb(rep: &FunctionalRepresentation, sigma: f64, seed: u64) -> Result<FunctionalRepresentation> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain("sigma must be non-negative"));
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
    let mut r = rng(seed);
    let mut out = rep.clone();
    for v in &mut out.values {
        *v += noise.sample(&mut r);
    }
    Ok(out)
}
