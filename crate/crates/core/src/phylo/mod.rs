//! Phylogenetic trees over models: neighbor joining, midpoint rooting,
//! Newick interchange and family-level aggregation.

mod midpoint;
mod newick;
mod nj;
mod tree;

use std::collections::BTreeMap;
use std::path::Path;

pub use midpoint::midpoint_root;
pub use newick::{parse_newick, quote_label, to_newick};
pub use nj::neighbor_joining;
pub use tree::{robinson_foulds, Edge, PhyloTree};

use crate::analysis::DistanceMatrix;
use crate::error::{Error, Result};
use crate::extraction::DnaStore;
use crate::util::euclidean;

/// Reads a `model_id,family` CSV with a header row.
pub fn read_family_map(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: source.clone(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut map = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            path: source.clone(),
            line,
            message: e.to_string(),
        })?;
        let (Some(model), Some(family)) = (row.get(0), row.get(1)) else {
            return Err(Error::Parse {
                path: source.clone(),
                line,
                message: "expected model_id,family".into(),
            });
        };
        if map.insert(model.to_string(), family.to_string()).is_some() {
            return Err(Error::Parse {
                path: source.clone(),
                line,
                message: format!("model `{model}` listed twice"),
            });
        }
    }
    Ok(map)
}

/// Distances between family centroids, the mean DNA of each family's
/// members. Every model in the store must have a family.
pub fn family_distance_matrix(store: &DnaStore, families: &BTreeMap<String, String>) -> Result<DistanceMatrix> {
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for r in store.records() {
        let family = families
            .get(&r.model_id)
            .ok_or_else(|| Error::domain(format!("no family given for `{}`", r.model_id)))?;
        let entry = sums.entry(family).or_insert_with(|| (vec![0.0; r.dim()], 0));
        for (s, v) in entry.0.iter_mut().zip(&r.vector) {
            *s += v;
        }
        entry.1 += 1;
    }
    if sums.len() < 2 {
        return Err(Error::domain("need at least two families"));
    }
    let labels: Vec<String> = sums.keys().map(|s| s.to_string()).collect();
    let centroids: Vec<Vec<f64>> = sums
        .values()
        .map(|(s, n)| s.iter().map(|v| v / *n as f64).collect())
        .collect();
    DistanceMatrix::from_fn(labels, |i, j| Ok(euclidean(&centroids[i], &centroids[j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dna::{DnaRecord, ProjectionSpec};
    use crate::extraction::Manifest;

    #[test]
    fn centroids() {
        let spec = ProjectionSpec::gaussian(0, 2, 4).unwrap();
        let mut store = DnaStore::new(Manifest::new(spec.clone(), 1.0, "e", "h"));
        for (id, v) in [("a1", [0.0, 0.0]), ("a2", [2.0, 0.0]), ("b1", [1.0, 3.0])] {
            store
                .insert(DnaRecord::new(id, v.to_vec(), spec.clone(), 1.0, "e", "h").unwrap())
                .unwrap();
        }
        let fam: BTreeMap<String, String> = [("a1", "A"), ("a2", "A"), ("b1", "B")]
            .map(|(m, f)| (m.to_string(), f.to_string()))
            .into_iter()
            .collect();
        let d = family_distance_matrix(&store, &fam).unwrap();
        assert_eq!(d.labels(), ["A", "B"]);
        assert_eq!(d.get(0, 1), 3.0);
        let mut partial = fam.clone();
        partial.remove("b1");
        assert!(family_distance_matrix(&store, &partial).is_err());
    }
}
