use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal, StandardNormal};

use super::families::{make_family_representations, SyntheticFamilySpec, SYNTHETIC_EMBEDDER};
use crate::analysis::{with_negative_samples, Relation, RelationPair};
use crate::dna::{project, sample_projection, DnaRecord, ProjectionSpec};
use crate::error::Result;
use crate::extraction::{DnaStore, Manifest};
use crate::routing::RoutingExample;
use crate::util::{derive_seed, rng};

/// Releasing organization of a synthetic model.
///
/// Families `2i` and `2i + 1` share `org-i`; members from index 5 onward are
/// spread over three cross-family `community-*` organizations, so
/// organization is an imperfect proxy for relatedness.
pub fn synthetic_org(family: usize, member: usize) -> String {
    if member >= 5 {
        format!("community-{}", (family + member) % 3)
    } else {
        format!("org-{}", family / 2)
    }
}

#[derive(Debug, Clone)]
pub struct RelationFixture {
    pub store: DnaStore,
    /// Within-family pairs labeled correlated plus as many random
    /// cross-family pairs labeled independent.
    pub pairs: Vec<RelationPair>,
    pub orgs: BTreeMap<String, String>,
    pub families: BTreeMap<String, String>,
}

/// Family members projected to `dna_dim` dimensions with `alpha = 1`.
pub fn relation_fixture(spec: &SyntheticFamilySpec, dna_dim: usize) -> Result<RelationFixture> {
    let (reps, labels) = make_family_representations(spec)?;
    let proj = ProjectionSpec::gaussian(derive_seed(spec.seed, "fixture-projection"), dna_dim, spec.dim)?;
    let matrix = sample_projection(&proj)?;
    let mut store = DnaStore::new(Manifest::new(proj, 1.0, SYNTHETIC_EMBEDDER, spec.prompt_set_hash()));
    let mut orgs = BTreeMap::new();
    let mut families = BTreeMap::new();
    for (i, rep) in reps.iter().enumerate() {
        let (f, m) = (labels[i], i % spec.per_family);
        store.insert(project(rep, &matrix, 1.0)?)?;
        orgs.insert(rep.model_id.clone(), synthetic_org(f, m));
        families.insert(rep.model_id.clone(), format!("family-{f:02}"));
    }
    let mut positives = Vec::new();
    for (i, a) in reps.iter().enumerate() {
        for (j, b) in reps.iter().enumerate().skip(i + 1) {
            if labels[i] == labels[j] {
                positives.push(RelationPair::new(
                    &a.model_id,
                    &b.model_id,
                    &orgs[&a.model_id],
                    &orgs[&b.model_id],
                    Relation::Correlated,
                )?);
            }
        }
    }
    let pairs = with_negative_samples(&positives, &orgs, spec.seed)?;
    Ok(RelationFixture {
        store,
        pairs,
        orgs,
        families,
    })
}

/// `n_models` models named `cluster-model-<i>` and `per_cluster` queries per
/// cluster, interleaved across clusters. Model `i` is correct exactly on the
/// queries of cluster `i`. DNAs are random Gaussian vectors.
pub fn routing_cluster_fixture(
    n_models: usize,
    per_cluster: usize,
    query_dim: usize,
    dna_dim: usize,
    seed: u64,
) -> Result<(DnaStore, Vec<RoutingExample>)> {
    let proj = ProjectionSpec::gaussian(seed, dna_dim, dna_dim * 4)?;
    let mut store = DnaStore::new(Manifest::new(proj.clone(), 1.0, SYNTHETIC_EMBEDDER, "routing-fixture"));
    let ids: Vec<String> = (0..n_models).map(|i| format!("cluster-model-{i}")).collect();
    let mut r = rng(derive_seed(seed, "routing-dna"));
    for id in &ids {
        let v: Vec<f64> = (0..dna_dim).map(|_| StandardNormal.sample(&mut r)).collect();
        store.insert(DnaRecord::new(id, v, proj.clone(), 1.0, SYNTHETIC_EMBEDDER, "routing-fixture")?)?;
    }
    let mut r = rng(derive_seed(seed, "routing-queries"));
    let centers: Vec<Vec<f64>> = (0..n_models)
        .map(|_| (0..query_dim).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect();
    let noise = Normal::new(0.0, 0.25).expect("valid std");
    let mut examples = Vec::with_capacity(n_models * per_cluster);
    for k in 0..per_cluster {
        for (c, center) in centers.iter().enumerate() {
            let embedding = center.iter().map(|x| x + noise.sample(&mut r)).collect();
            let outcomes = ids.iter().enumerate().map(|(m, id)| (id.clone(), u8::from(m == c))).collect();
            examples.push(RoutingExample {
                query_id: format!("q{c}-{k:04}"),
                embedding,
                outcomes,
            });
        }
    }
    Ok((store, examples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::greedy_baseline;

    #[test]
    fn relation_fixture_shape() {
        let spec = SyntheticFamilySpec {
            seed: 3,
            n_families: 4,
            per_family: 6,
            dim: 32,
            centroid_scale: 1.0,
            within_noise: 0.1,
            separable: true,
        };
        let fx = relation_fixture(&spec, 16).unwrap();
        assert_eq!(fx.store.len(), 24);
        let pos = fx.pairs.iter().filter(|p| p.label.is_correlated()).count();
        assert_eq!(pos, 4 * 15);
        assert_eq!(fx.pairs.len(), 2 * pos);
        // organization is informative but imperfect
        let greedy_hits = fx
            .pairs
            .iter()
            .filter(|p| greedy_baseline(p).unwrap() == p.label)
            .count();
        assert!(greedy_hits > fx.pairs.len() / 2 && greedy_hits < fx.pairs.len());
    }

    #[test]
    fn routing_fixture_shape() {
        let (store, data) = routing_cluster_fixture(3, 4, 5, 6, 1).unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!(data.len(), 12);
        for ex in &data {
            assert_eq!(ex.outcomes.values().map(|&v| v as usize).sum::<usize>(), 1);
        }
    }
}
