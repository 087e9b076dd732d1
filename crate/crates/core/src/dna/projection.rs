//! Seeded Gaussian random projections.
//!
//! A [`ProjectionSpec`] fully determines its matrix: entries are drawn
//! row-major from a ChaCha20 stream seeded with `seed`, each distributed as
//! `N(0, entry_std^2)`. Because the stream is regenerated on demand, large
//! matrices never need to be stored; [`project_streaming`] produces the same
//! bits as materializing with [`sample_projection`] and calling [`project`].

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::representation::{DnaRecord, FunctionalRepresentation};
use crate::error::{Error, Result};
use crate::util::{rng, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionKind {
    #[default]
    Gaussian,
    /// The identity map (requires `L == D`). Used for calibration and tests.
    Identity,
}

/// Everything needed to regenerate a projection matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub seed: u64,
    /// Output (DNA) dimension.
    #[serde(rename = "L")]
    pub dna_dim: usize,
    /// Input dimension, `p * t`.
    #[serde(rename = "D")]
    pub source_dim: usize,
    pub entry_std: f64,
    #[serde(default, skip_serializing_if = "is_gaussian")]
    pub kind: ProjectionKind,
}

fn is_gaussian(kind: &ProjectionKind) -> bool {
    *kind == ProjectionKind::Gaussian
}

impl ProjectionSpec {
    /// Gaussian spec with the norm-preserving default `entry_std = 1/sqrt(L)`.
    pub fn gaussian(seed: u64, dna_dim: usize, source_dim: usize) -> Result<Self> {
        let spec = Self {
            seed,
            dna_dim,
            source_dim,
            entry_std: 1.0 / (dna_dim.max(1) as f64).sqrt(),
            kind: ProjectionKind::Gaussian,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let spec = Self {
            seed: 0,
            dna_dim: dim,
            source_dim: dim,
            entry_std: 1.0,
            kind: ProjectionKind::Identity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_entry_std(mut self, entry_std: f64) -> Result<Self> {
        self.entry_std = entry_std;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dna_dim == 0 || self.source_dim == 0 {
            return Err(Error::domain("projection dimensions must be positive"));
        }
        if self.dna_dim > self.source_dim {
            return Err(Error::domain(format!(
                "projection must reduce dimension: L = {} exceeds D = {}",
                self.dna_dim, self.source_dim
            )));
        }
        if !(self.entry_std > 0.0 && self.entry_std.is_finite()) {
            return Err(Error::domain("entry_std must be positive"));
        }
        if self.kind == ProjectionKind::Identity && self.dna_dim != self.source_dim {
            return Err(Error::domain("identity projection requires L == D"));
        }
        Ok(())
    }

    /// Stable digest identifying this projection.
    pub fn fingerprint(&self) -> String {
        let kind = match self.kind {
            ProjectionKind::Gaussian => "gaussian-chacha20-v1",
            ProjectionKind::Identity => "identity",
        };
        sha256_hex(
            format!(
                "{kind}:{}:{}:{}:{:016x}",
                self.seed,
                self.dna_dim,
                self.source_dim,
                self.entry_std.to_bits()
            )
            .as_bytes(),
        )
    }

    fn normal(&self) -> Normal<f64> {
        Normal::new(0.0, self.entry_std).expect("validated entry_std")
    }
}

/// Dense row-major `L x D` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    spec: ProjectionSpec,
    data: Vec<f64>,
}

impl ProjectionMatrix {
    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.spec.dna_dim
    }

    pub fn cols(&self) -> usize {
        self.spec.source_dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.cols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `A x` without scaling.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                context: "projection input",
                expected: self.cols(),
                actual: x.len(),
            });
        }
        Ok((0..self.rows()).map(|i| dot(self.row(i), x)).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (u, v) in a.iter().zip(b) {
        acc += u * v;
    }
    acc
}

/// Materializes the matrix described by `spec`.
pub fn sample_projection(spec: &ProjectionSpec) -> Result<ProjectionMatrix> {
    spec.validate()?;
    let (l, d) = (spec.dna_dim, spec.source_dim);
    let data = match spec.kind {
        ProjectionKind::Identity => {
            let mut data = vec![0.0; l * d];
            for i in 0..l {
                data[i * d + i] = 1.0;
            }
            data
        }
        ProjectionKind::Gaussian => {
            let mut rng = rng(spec.seed);
            let normal = spec.normal();
            (0..l * d).map(|_| normal.sample(&mut rng)).collect()
        }
    };
    Ok(ProjectionMatrix {
        spec: spec.clone(),
        data,
    })
}

/// `alpha * A x` as a [`DnaRecord`] carrying the representation's provenance.
pub fn project(
    rep: &FunctionalRepresentation,
    matrix: &ProjectionMatrix,
    alpha: f64,
) -> Result<DnaRecord> {
    check_alpha(alpha)?;
    let raw = matrix.apply(&rep.values)?;
    finish(rep, matrix.spec().clone(), alpha, raw)
}

/// Same result as [`project`] but regenerates matrix rows on the fly, so
/// memory stays at `O(D)` regardless of `L * D`.
pub fn project_streaming(
    rep: &FunctionalRepresentation,
    spec: &ProjectionSpec,
    alpha: f64,
) -> Result<DnaRecord> {
    spec.validate()?;
    check_alpha(alpha)?;
    if rep.dim() != spec.source_dim {
        return Err(Error::DimensionMismatch {
            context: "projection input",
            expected: spec.source_dim,
            actual: rep.dim(),
        });
    }
    let raw = match spec.kind {
        ProjectionKind::Identity => rep.values.iter().map(|v| v + 0.0).collect(),
        ProjectionKind::Gaussian => {
            let mut rng = rng(spec.seed);
            let normal = spec.normal();
            let mut row = vec![0.0; spec.source_dim];
            (0..spec.dna_dim)
                .map(|_| {
                    row.iter_mut().for_each(|e| *e = normal.sample(&mut rng));
                    dot(&row, &rep.values)
                })
                .collect()
        }
    };
    finish(rep, spec.clone(), alpha, raw)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must be positive, got {alpha}")))
    }
}

fn finish(
    rep: &FunctionalRepresentation,
    spec: ProjectionSpec,
    alpha: f64,
    raw: Vec<f64>,
) -> Result<DnaRecord> {
    let vector = raw.into_iter().map(|v| alpha * v).collect();
    DnaRecord::new(
        rep.model_id.clone(),
        vector,
        spec,
        alpha,
        rep.embedder_id.clone(),
        rep.prompt_set_hash.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_rep(seed: u64, d: usize) -> FunctionalRepresentation {
        let mut r = rng(seed);
        let values = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        FunctionalRepresentation::new("m", "e", "h", d, 1, values).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(ProjectionSpec::gaussian(1, 128, 64).is_err());
        assert!(ProjectionSpec::gaussian(1, 0, 64).is_err());
        assert!(ProjectionSpec::gaussian(1, 8, 0).is_err());
        let s = ProjectionSpec::gaussian(1, 16, 64).unwrap();
        assert_eq!(s.entry_std, 0.25);
        assert!(s.clone().with_entry_std(0.0).is_err());
        assert_ne!(s.fingerprint(), ProjectionSpec::gaussian(2, 16, 64).unwrap().fingerprint());
    }

    #[test]
    fn same_spec_same_bits() {
        let s = ProjectionSpec::gaussian(42, 32, 100).unwrap();
        let a = sample_projection(&s).unwrap();
        let b = sample_projection(&s).unwrap();
        let bits = |m: &ProjectionMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = sample_projection(&ProjectionSpec::gaussian(43, 32, 100).unwrap()).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    // Monte-Carlo check: the sample variance over 524,288 entries has a relative
    // standard error of about sqrt(2/n) = 0.2%, far inside the 10% window.
    #[test]
    fn entry_variance() {
        let s = ProjectionSpec::gaussian(7, 128, 4096).unwrap();
        let m = sample_projection(&s).unwrap();
        let n = m.as_slice().len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        let var = m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0 / 128.0).abs() < 0.1 / 128.0, "variance {var}");
        assert!(mean.abs() < 1e-3);
    }

    #[test]
    fn zero_and_identity_cases() {
        let zero = FunctionalRepresentation::new("m", "e", "h", 4, 3, vec![0.0; 12]).unwrap();
        let m = sample_projection(&ProjectionSpec::gaussian(1, 6, 12).unwrap()).unwrap();
        assert!(project(&zero, &m, 1.0).unwrap().vector.iter().all(|v| *v == 0.0));

        let rep = random_rep(3, 12);
        let id = sample_projection(&ProjectionSpec::identity(12).unwrap()).unwrap();
        assert_eq!(project(&rep, &id, 1.0).unwrap().vector, rep.values);
        assert_eq!(
            project_streaming(&rep, &ProjectionSpec::identity(12).unwrap(), 1.0)
                .unwrap()
                .vector,
            rep.values
        );
    }

    #[test]
    fn dimension_mismatch() {
        let rep = random_rep(3, 10);
        let m = sample_projection(&ProjectionSpec::gaussian(1, 4, 12).unwrap()).unwrap();
        assert!(matches!(
            project(&rep, &m, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(project(&random_rep(3, 12), &m, 0.0).is_err());
    }

    #[test]
    fn streaming_matches_materialized() {
        let spec = ProjectionSpec::gaussian(99, 24, 300).unwrap();
        let m = sample_projection(&spec).unwrap();
        let rep = random_rep(5, 300);
        let a = project(&rep, &m, 1.7).unwrap();
        let b = project_streaming(&rep, &spec, 1.7).unwrap();
        assert_eq!(a.vector, b.vector);
    }

    // Both sides evaluated independently: project the combination, and
    // combine the projections.
    #[test]
    fn projection_is_linear() {
        let d = 200;
        let m = sample_projection(&ProjectionSpec::gaussian(17, 20, d).unwrap()).unwrap();
        let mut r = rng(1234);
        for trial in 0..20 {
            let (a, b): (f64, f64) = (r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
            let e1 = random_rep(100 + trial, d);
            let e2 = random_rep(200 + trial, d);
            let combo: Vec<f64> = e1.values.iter().zip(&e2.values).map(|(x, y)| a * x + b * y).collect();
            let combo = FunctionalRepresentation::new("m", "e", "h", d, 1, combo).unwrap();
            let lhs = project(&combo, &m, 1.0).unwrap().vector;
            let p1 = project(&e1, &m, 1.0).unwrap().vector;
            let p2 = project(&e2, &m, 1.0).unwrap().vector;
            let scale = lhs.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for i in 0..lhs.len() {
                let rhs = a * p1[i] + b * p2[i];
                assert!((lhs[i] - rhs).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn norm_preserved_in_expectation() {
        let d = 256;
        let mut x = random_rep(8, d).values;
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= n);
        let rep = FunctionalRepresentation::new("m", "e", "h", d, 1, x).unwrap();
        let trials = 1000;
        let mean: f64 = (0..trials)
            .map(|seed| {
                let spec = ProjectionSpec::gaussian(seed, 16, d).unwrap();
                let v = project_streaming(&rep, &spec, 1.0).unwrap().vector;
                v.iter().map(|e| e * e).sum::<f64>()
            })
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean squared norm {mean}");
    }
}
