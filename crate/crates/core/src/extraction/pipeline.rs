use std::path::Path;

use chrono::{DateTime, SubsecRound, Utc};
use serde::Serialize;

use super::store::{write_manifest, DnaStore, Manifest};
use crate::dna::{
    project, project_streaming, sample_projection, DnaRecord, FunctionalRepresentation,
    ProjectionMatrix, ProjectionSpec,
};
use crate::error::{Error, Result};
use crate::model_io::{ModelEndpoint, ModelIo, PromptSet};

/// Matrices up to this many entries are materialized once and shared;
/// larger ones are regenerated row by row for every model.
const MATERIALIZE_LIMIT: usize = 1 << 24;

/// Responses, embeddings and concatenation for one model.
pub fn extract_representation(
    io: &ModelIo,
    endpoint: &ModelEndpoint,
    prompts: &PromptSet,
    embedder: &ModelEndpoint,
) -> Result<FunctionalRepresentation> {
    if prompts.is_empty() {
        return Err(Error::domain("prompt set is empty"));
    }
    let responses = io.generate_all(endpoint, prompts)?;
    let embeddings = io.embed_all(embedder, &responses)?;
    let blocks: Vec<Vec<f64>> = embeddings.into_iter().map(|e| e.values).collect();
    FunctionalRepresentation::from_embeddings(
        endpoint.model_id.clone(),
        embedder.model_id.clone(),
        prompts.hash(),
        &blocks,
    )
}

/// Full pipeline for one model: representation, then `alpha * A E`.
pub fn extract_dna(
    io: &ModelIo,
    endpoint: &ModelEndpoint,
    prompts: &PromptSet,
    embedder: &ModelEndpoint,
    spec: &ProjectionSpec,
    alpha: f64,
) -> Result<DnaRecord> {
    let rep = extract_representation(io, endpoint, prompts, embedder)?;
    Projector::new(spec.clone())?.project(&rep, alpha)
}

/// Applies one projection to many representations.
struct Projector {
    spec: ProjectionSpec,
    matrix: Option<ProjectionMatrix>,
}

impl Projector {
    fn new(spec: ProjectionSpec) -> Result<Self> {
        spec.validate()?;
        let matrix = if spec.dna_dim.saturating_mul(spec.source_dim) <= MATERIALIZE_LIMIT {
            Some(sample_projection(&spec)?)
        } else {
            None
        };
        Ok(Self { spec, matrix })
    }

    fn project(&self, rep: &FunctionalRepresentation, alpha: f64) -> Result<DnaRecord> {
        if rep.dim() != self.spec.source_dim {
            return Err(Error::DimensionMismatch {
                context: "representation vs projection (p * t)",
                expected: self.spec.source_dim,
                actual: rep.dim(),
            });
        }
        match &self.matrix {
            Some(m) => project(rep, m, alpha),
            None => project_streaming(rep, &self.spec, alpha),
        }
    }
}

/// How the projection of a new store is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionPlan {
    /// Use exactly this spec.
    Fixed(ProjectionSpec),
    /// Gaussian with this seed and DNA dimension; `D = p * t` is taken from
    /// the first model extracted.
    Seeded { seed: u64, dna_dim: usize },
}

#[derive(Debug, Clone)]
pub struct FleetOptions {
    pub alpha: f64,
    /// Models processed concurrently.
    pub parallel_models: usize,
    /// Timestamp stamped on new records; `None` means "now".
    pub created_at: Option<DateTime<Utc>>,
}

impl Default for FleetOptions {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            parallel_models: 2,
            created_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFailure {
    pub model_id: String,
    pub reason: String,
    pub retriable: bool,
}

#[derive(Debug, Clone)]
pub struct FleetReport {
    pub store: DnaStore,
    /// Models extracted in this run, in roster order.
    pub added: Vec<String>,
    /// Models already present in the store and left untouched.
    pub skipped: Vec<String>,
    pub failures: Vec<ModelFailure>,
}

/// Errors that abort only the model they occurred for.
fn is_model_local(e: &Error) -> bool {
    matches!(
        e,
        Error::Http { .. } | Error::Transport { .. } | Error::Protocol { .. } | Error::Domain(_)
    )
}

/// Extracts every roster model not yet in the store.
///
/// With `out_dir`, the manifest is written as soon as the projection is
/// fixed and each record is appended the moment it is produced, so existing
/// lines are never rewritten. Models that fail with a network or protocol
/// error are reported and skipped; embedder dimension drift and projection
/// mismatches abort the run.
pub fn extract_fleet(
    io: &ModelIo,
    roster: &[ModelEndpoint],
    prompts: &PromptSet,
    embedder: &ModelEndpoint,
    plan: ProjectionPlan,
    options: &FleetOptions,
    existing: Option<DnaStore>,
    out_dir: Option<&Path>,
) -> Result<FleetReport> {
    if !(options.alpha > 0.0 && options.alpha.is_finite()) {
        return Err(Error::domain("alpha must be positive"));
    }
    let created_at = options
        .created_at
        .unwrap_or_else(|| Utc::now().trunc_subsecs(0));

    let mut store = existing;
    if let Some(s) = &store {
        let m = s.manifest();
        if m.embedder_id != embedder.model_id {
            return Err(Error::provenance(format!(
                "store was built with embedder `{}`, not `{}`",
                m.embedder_id, embedder.model_id
            )));
        }
        if m.prompt_set_hash != prompts.hash() {
            return Err(Error::provenance(
                "store was built from a different prompt set",
            ));
        }
        if m.alpha != options.alpha {
            return Err(Error::provenance(format!(
                "store uses alpha = {}, not {}",
                m.alpha, options.alpha
            )));
        }
        if let ProjectionPlan::Fixed(spec) = &plan {
            if *spec != m.projection {
                return Err(Error::provenance("store uses a different projection"));
            }
        }
        if let ProjectionPlan::Seeded { seed, dna_dim } = &plan {
            if (*seed, *dna_dim) != (m.projection.seed, m.projection.dna_dim) {
                return Err(Error::provenance(format!(
                    "store uses projection seed {} with L = {}",
                    m.projection.seed, m.projection.dna_dim
                )));
            }
        }
    }
    let mut projector = match (&store, &plan) {
        (Some(s), _) => Some(Projector::new(s.manifest().projection.clone())?),
        (None, ProjectionPlan::Fixed(spec)) => Some(Projector::new(spec.clone())?),
        (None, ProjectionPlan::Seeded { .. }) => None,
    };

    let mut added = Vec::new();
    let mut skipped = Vec::new();
    let mut failures = Vec::new();
    let pending: Vec<&ModelEndpoint> = roster
        .iter()
        .filter(|m| {
            let present = store.as_ref().is_some_and(|s| s.contains(&m.model_id));
            if present {
                skipped.push(m.model_id.clone());
            }
            !present
        })
        .collect();

    for chunk in pending.chunks(options.parallel_models.max(1)) {
        let reps: Vec<Result<FunctionalRepresentation>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|ep| scope.spawn(|| extract_representation(io, ep, prompts, embedder)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("extraction thread panicked"))
                .collect()
        });
        for (ep, rep) in chunk.iter().zip(reps) {
            let rep = match rep {
                Ok(rep) => rep,
                Err(e) if is_model_local(&e) => {
                    log::warn!("model `{}` failed: {e}", ep.model_id);
                    failures.push(ModelFailure {
                        model_id: ep.model_id.clone(),
                        reason: e.to_string(),
                        retriable: e.is_retriable(),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            if projector.is_none() {
                let ProjectionPlan::Seeded { seed, dna_dim } = plan else {
                    unreachable!("fixed plans build their projector up front")
                };
                projector = Some(Projector::new(ProjectionSpec::gaussian(seed, dna_dim, rep.dim())?)?);
            }
            let proj = projector.as_ref().expect("set above");
            let s = store.get_or_insert_with(|| {
                DnaStore::new(Manifest::new(
                    proj.spec.clone(),
                    options.alpha,
                    embedder.model_id.clone(),
                    prompts.hash(),
                ))
            });
            if let Some(dir) = out_dir {
                if !DnaStore::exists(dir) {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    write_manifest(dir, s.manifest())?;
                }
            }
            let record = proj.project(&rep, options.alpha)?.with_created_at(created_at);
            match out_dir {
                Some(dir) => s.append(dir, record)?,
                None => {
                    s.insert(record)?;
                }
            }
            log::info!("extracted DNA for `{}`", ep.model_id);
            added.push(ep.model_id.clone());
        }
    }

    match store {
        Some(store) if !added.is_empty() || !skipped.is_empty() => Ok(FleetReport {
            store,
            added,
            skipped,
            failures,
        }),
        _ => Err(Error::domain(format!(
            "no model was extracted successfully ({} failure(s){})",
            failures.len(),
            failures
                .first()
                .map(|f| format!("; first: `{}`: {}", f.model_id, f.reason))
                .unwrap_or_default()
        ))),
    }
}
