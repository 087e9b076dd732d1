use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

use super::projection::ProjectionSpec;
use crate::error::{Error, Result};
use crate::util::{ensure_finite, euclidean};

/// Concatenated response embeddings of one model over one prompt set.
///
/// `values` holds `t` blocks of `p` entries, one block per prompt, in prompt order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRepresentation {
    pub model_id: String,
    pub embedder_id: String,
    pub prompt_set_hash: String,
    pub p: usize,
    pub t: usize,
    pub values: Vec<f64>,
}

impl FunctionalRepresentation {
    pub fn new(
        model_id: impl Into<String>,
        embedder_id: impl Into<String>,
        prompt_set_hash: impl Into<String>,
        p: usize,
        t: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if p == 0 || t == 0 {
            return Err(Error::domain("p and t must both be at least 1"));
        }
        if values.len() != p * t {
            return Err(Error::DimensionMismatch {
                context: "functional representation",
                expected: p * t,
                actual: values.len(),
            });
        }
        let model_id = model_id.into();
        ensure_finite(&values, &format!("representation of `{model_id}`"))?;
        Ok(Self {
            model_id,
            embedder_id: embedder_id.into(),
            prompt_set_hash: prompt_set_hash.into(),
            p,
            t,
            values,
        })
    }

    /// Concatenates per-prompt embeddings, which must all share one length.
    pub fn from_embeddings(
        model_id: impl Into<String>,
        embedder_id: impl Into<String>,
        prompt_set_hash: impl Into<String>,
        embeddings: &[Vec<f64>],
    ) -> Result<Self> {
        let p = embeddings.first().map(Vec::len).unwrap_or(0);
        let mut values = Vec::with_capacity(p * embeddings.len());
        for e in embeddings {
            if e.len() != p {
                return Err(Error::DimensionMismatch {
                    context: "per-prompt embedding",
                    expected: p,
                    actual: e.len(),
                });
            }
            values.extend_from_slice(e);
        }
        Self::new(model_id, embedder_id, prompt_set_hash, p, embeddings.len(), values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Embedding of the `j`-th prompt's response.
    pub fn block(&self, j: usize) -> &[f64] {
        &self.values[j * self.p..(j + 1) * self.p]
    }
}

/// Empirical functional distance: Euclidean distance between two
/// representations over the same prompt sample.
pub fn functional_distance(
    a: &FunctionalRepresentation,
    b: &FunctionalRepresentation,
) -> Result<f64> {
    if a.prompt_set_hash != b.prompt_set_hash {
        return Err(Error::provenance(format!(
            "prompt sets differ ({} vs {})",
            a.prompt_set_hash, b.prompt_set_hash
        )));
    }
    if a.embedder_id != b.embedder_id {
        return Err(Error::provenance(format!(
            "embedders differ (`{}` vs `{}`)",
            a.embedder_id, b.embedder_id
        )));
    }
    if a.p != b.p || a.t != b.t {
        return Err(Error::DimensionMismatch {
            context: "functional distance",
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(euclidean(&a.values, &b.values))
}

/// A model's projected behavior vector together with the provenance needed
/// to decide whether two vectors are comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnaRecord {
    pub model_id: String,
    pub vector: Vec<f64>,
    pub projection: ProjectionSpec,
    pub alpha: f64,
    pub embedder_id: String,
    pub prompt_set_hash: String,
    pub created_at: DateTime<Utc>,
}

impl DnaRecord {
    pub fn new(
        model_id: impl Into<String>,
        vector: Vec<f64>,
        projection: ProjectionSpec,
        alpha: f64,
        embedder_id: impl Into<String>,
        prompt_set_hash: impl Into<String>,
    ) -> Result<Self> {
        if vector.len() != projection.dna_dim {
            return Err(Error::DimensionMismatch {
                context: "DNA vector",
                expected: projection.dna_dim,
                actual: vector.len(),
            });
        }
        let model_id = model_id.into();
        ensure_finite(&vector, &format!("DNA of `{model_id}`"))?;
        Ok(Self {
            model_id,
            vector,
            projection,
            alpha,
            embedder_id: embedder_id.into(),
            prompt_set_hash: prompt_set_hash.into(),
            created_at: Utc::now().trunc_subsecs(0),
        })
    }

    pub fn with_created_at(mut self, at: DateTime<Utc>) -> Self {
        self.created_at = at;
        self
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Checks that two records were produced under the same projection,
    /// scale, embedder and prompt set.
    pub fn check_comparable(&self, other: &DnaRecord) -> Result<()> {
        if self.projection != other.projection {
            return Err(Error::provenance(format!(
                "`{}` and `{}` use different projections",
                self.model_id, other.model_id
            )));
        }
        if self.alpha != other.alpha {
            return Err(Error::provenance(format!(
                "`{}` and `{}` use different scales ({} vs {})",
                self.model_id, other.model_id, self.alpha, other.alpha
            )));
        }
        if self.embedder_id != other.embedder_id {
            return Err(Error::provenance(format!(
                "`{}` and `{}` use different embedders",
                self.model_id, other.model_id
            )));
        }
        if self.prompt_set_hash != other.prompt_set_hash {
            return Err(Error::provenance(format!(
                "`{}` and `{}` were extracted from different prompt sets",
                self.model_id, other.model_id
            )));
        }
        Ok(())
    }
}

/// Euclidean distance between two comparable DNA vectors.
pub fn dna_distance(a: &DnaRecord, b: &DnaRecord) -> Result<f64> {
    a.check_comparable(b)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "DNA distance",
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(euclidean(&a.vector, &b.vector))
}
