use rand::Rng;

use crate::error::{Error, Result};
use crate::phylo::{Edge, PhyloTree};
use crate::util::rng;

/// An unrooted binary tree with leaves `t00`, `t01`, ... grown by attaching
/// each new leaf to the midpoint of a uniformly chosen edge. Every edge
/// length is drawn uniformly from `[min_len, max_len]`.
pub fn random_binary_tree(n_leaves: usize, min_len: f64, max_len: f64, seed: u64) -> Result<PhyloTree> {
    if n_leaves < 2 {
        return Err(Error::domain("a tree needs at least two leaves"));
    }
    if !(min_len.is_finite() && max_len.is_finite() && min_len <= max_len) {
        return Err(Error::domain("invalid branch length range"));
    }
    let mut r = rng(seed);
    let len = |r: &mut rand_chacha::ChaCha20Rng| {
        if min_len == max_len {
            min_len
        } else {
            r.random_range(min_len..=max_len)
        }
    };
    let name = |i: usize| Some(format!("t{i:02}"));
    let mut labels = vec![name(0), name(1)];
    let mut edges = vec![Edge {
        a: 0,
        b: 1,
        raw_length: len(&mut r),
    }];
    for leaf in 2..n_leaves {
        let k = r.random_range(0..edges.len());
        let old = edges[k].clone();
        let mid = labels.len();
        labels.push(None);
        let tip = labels.len();
        labels.push(name(leaf));
        edges[k] = Edge {
            a: old.a,
            b: mid,
            raw_length: len(&mut r),
        };
        edges.push(Edge {
            a: mid,
            b: old.b,
            raw_length: len(&mut r),
        });
        edges.push(Edge {
            a: mid,
            b: tip,
            raw_length: len(&mut r),
        });
    }
    PhyloTree::new(labels, edges, None)
}
