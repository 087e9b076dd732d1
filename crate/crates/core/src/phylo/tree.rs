use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Length as estimated; may be negative for neighbor joining on
    /// non-additive input.
    pub raw_length: f64,
}

impl Edge {
    /// Display length: the raw length clamped at zero.
    pub fn length(&self) -> f64 {
        self.raw_length.max(0.0)
    }

    pub fn other(&self, node: usize) -> usize {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// A tree over labeled leaves stored as nodes plus undirected weighted edges.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyloTree {
    labels: Vec<Option<String>>,
    edges: Vec<Edge>,
    root: Option<usize>,
}

impl PhyloTree {
    /// Validates connectivity, acyclicity and unique leaf labels. Every leaf
    /// (degree <= 1 node) must carry a label.
    pub fn new(labels: Vec<Option<String>>, edges: Vec<Edge>, root: Option<usize>) -> Result<Self> {
        let t = Self { labels, edges, root };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::domain("empty tree"));
        }
        if self.edges.len() + 1 != n {
            return Err(Error::domain(format!(
                "{} nodes need {} edges, found {}",
                n,
                n - 1,
                self.edges.len()
            )));
        }
        for e in &self.edges {
            if e.a >= n || e.b >= n || e.a == e.b {
                return Err(Error::domain("edge refers to an invalid node"));
            }
            if !e.raw_length.is_finite() {
                return Err(Error::NonFinite("branch length".into()));
            }
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::domain("tree is not connected"));
        }
        let mut names = BTreeSet::new();
        for (i, l) in self.labels.iter().enumerate() {
            if adj[i].len() <= 1 && l.is_none() {
                return Err(Error::domain("leaf without a label"));
            }
            if adj[i].len() <= 1 {
                let l = l.as_ref().unwrap();
                if !names.insert(l.as_str()) {
                    return Err(Error::domain(format!("duplicate leaf label `{l}`")));
                }
            }
        }
        if let Some(r) = self.root {
            if r >= n {
                return Err(Error::domain("root refers to an invalid node"));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn label(&self, node: usize) -> Option<&str> {
        self.labels[node].as_deref()
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn is_rooted(&self) -> bool {
        self.root.is_some()
    }

    /// Neighbors of each node as `(node, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.labels.len()];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.a].push((e.b, k));
            adj[e.b].push((e.a, k));
        }
        adj
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.a == node || e.b == node).count()
    }

    /// Leaf node ids ordered by label.
    pub fn leaves(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut leaves: Vec<usize> = (0..self.labels.len())
            .filter(|&i| adj[i].len() <= 1 && Some(i) != self.root)
            .collect();
        leaves.sort_by(|&a, &b| self.labels[a].cmp(&self.labels[b]));
        leaves
    }

    pub fn leaf_labels(&self) -> Vec<String> {
        self.leaves().into_iter().map(|i| self.labels[i].clone().unwrap()).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    /// Raw path length from `from` to every node.
    pub fn distances_from(&self, from: usize) -> Vec<f64> {
        let adj = self.adjacency();
        let mut dist = vec![f64::NAN; self.labels.len()];
        dist[from] = 0.0;
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            for &(v, k) in &adj[u] {
                if dist[v].is_nan() {
                    dist[v] = dist[u] + self.edges[k].raw_length;
                    stack.push(v);
                }
            }
        }
        dist
    }

    /// Leaf-to-leaf raw path lengths, rows ordered by label; exactly symmetric.
    pub fn path_lengths(&self) -> (Vec<String>, Vec<f64>) {
        let leaves = self.leaves();
        let n = leaves.len();
        let mut values = vec![0.0; n * n];
        for (i, &a) in leaves.iter().enumerate() {
            let d = self.distances_from(a);
            for (j, &b) in leaves.iter().enumerate().skip(i + 1) {
                values[i * n + j] = d[b];
                values[j * n + i] = d[b];
            }
        }
        (self.leaf_labels(), values)
    }

    /// Node sequence from `a` to `b`.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let mut parent = vec![usize::MAX; self.labels.len()];
        parent[a] = a;
        let mut stack = vec![a];
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    stack.push(v);
                }
            }
        }
        let mut path = vec![b];
        let mut cur = b;
        while cur != a {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }

    pub(crate) fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }

    /// The unrooted form: a degree-2 root is dissolved and its two edges
    /// merged; any other root just loses its root status.
    pub fn unroot(&self) -> PhyloTree {
        let Some(r) = self.root else {
            return self.clone();
        };
        let adj = self.adjacency();
        if adj[r].len() != 2 || self.labels[r].is_some() {
            return Self {
                root: None,
                ..self.clone()
            };
        }
        let (u, ku) = adj[r][0];
        let (v, kv) = adj[r][1];
        let merged = self.edges[ku].raw_length + self.edges[kv].raw_length;
        let remap = |i: usize| if i > r { i - 1 } else { i };
        let mut labels = self.labels.clone();
        labels.remove(r);
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != ku && *k != kv)
            .map(|(_, e)| Edge {
                a: remap(e.a),
                b: remap(e.b),
                raw_length: e.raw_length,
            })
            .collect();
        edges.push(Edge {
            a: remap(u),
            b: remap(v),
            raw_length: merged,
        });
        Self {
            labels,
            edges,
            root: None,
        }
    }

    /// Non-trivial leaf bipartitions, each given as the sorted label indices
    /// of the side without the smallest label.
    pub fn bipartitions(&self) -> BTreeSet<Vec<usize>> {
        let leaves = self.leaves();
        let n = leaves.len();
        let index: BTreeMap<usize, usize> = leaves.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let adj = self.adjacency();
        let mut out = BTreeSet::new();
        for e in &self.edges {
            // leaves reachable from e.b without crossing e
            let mut side = Vec::new();
            let mut seen = vec![false; self.labels.len()];
            seen[e.a] = true;
            seen[e.b] = true;
            let mut stack = vec![e.b];
            while let Some(u) = stack.pop() {
                if let Some(&i) = index.get(&u) {
                    side.push(i);
                }
                for &(v, _) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            if side.contains(&0) {
                let inside: BTreeSet<usize> = side.into_iter().collect();
                side = (0..n).filter(|i| !inside.contains(i)).collect();
            }
            side.sort_unstable();
            if side.len() >= 2 && side.len() + 2 <= n {
                out.insert(side);
            }
        }
        out
    }
}

/// Robinson–Foulds distance: the size of the symmetric difference of the
/// two trees' non-trivial bipartitions. Rooting is ignored.
pub fn robinson_foulds(a: &PhyloTree, b: &PhyloTree) -> Result<usize> {
    if a.leaf_labels() != b.leaf_labels() {
        return Err(Error::domain("trees have different leaf sets"));
    }
    let (x, y) = (a.bipartitions(), b.bipartitions());
    Ok(x.symmetric_difference(&y).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartet(ab_cd: bool) -> PhyloTree {
        let labels = ["A", "B", "C", "D"].map(|s| Some(s.to_string())).to_vec();
        let mut labels = labels;
        labels.extend([None, None]);
        let (x, y) = if ab_cd { (1, 2) } else { (2, 1) };
        let edges = vec![
            Edge { a: 0, b: 4, raw_length: 1.0 },
            Edge { a: x, b: 4, raw_length: 1.0 },
            Edge { a: y, b: 5, raw_length: 1.0 },
            Edge { a: 3, b: 5, raw_length: 1.0 },
            Edge { a: 4, b: 5, raw_length: 0.5 },
        ];
        PhyloTree::new(labels, edges, None).unwrap()
    }

    #[test]
    fn paths_and_splits() {
        let t = quartet(true);
        let (labels, d) = t.path_lengths();
        assert_eq!(labels, ["A", "B", "C", "D"]);
        assert_eq!(d[1], 2.0);
        assert_eq!(d[2], 2.5);
        assert_eq!(t.bipartitions().into_iter().collect::<Vec<_>>(), vec![vec![2, 3]]);
        assert_eq!(robinson_foulds(&t, &t).unwrap(), 0);
        assert_eq!(robinson_foulds(&t, &quartet(false)).unwrap(), 2);
    }

    #[test]
    fn rejects_malformed() {
        let l = vec![Some("A".to_string()), Some("B".to_string())];
        assert!(PhyloTree::new(l.clone(), vec![], None).is_err());
        let e = Edge { a: 0, b: 1, raw_length: f64::NAN };
        assert!(PhyloTree::new(l.clone(), vec![e], None).is_err());
        let dup = vec![Some("A".to_string()), Some("A".to_string())];
        let e = Edge { a: 0, b: 1, raw_length: 1.0 };
        assert!(PhyloTree::new(dup, vec![e], None).is_err());
    }

    #[test]
    fn unroot_merges_root_edges() {
        let labels = vec![None, Some("A".to_string()), Some("B".to_string())];
        let edges = vec![
            Edge { a: 0, b: 1, raw_length: 2.0 },
            Edge { a: 0, b: 2, raw_length: 2.0 },
        ];
        let t = PhyloTree::new(labels, edges, Some(0)).unwrap();
        assert_eq!(t.leaf_labels(), ["A", "B"]);
        let u = t.unroot();
        assert_eq!(u.node_count(), 2);
        assert_eq!(u.edges()[0].raw_length, 4.0);
        assert!(!u.is_rooted());
    }
}
