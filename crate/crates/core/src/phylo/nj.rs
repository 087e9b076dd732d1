use std::cmp::Ordering;

use super::tree::{Edge, PhyloTree};
use crate::analysis::DistanceMatrix;
use crate::error::{Error, Result};

/// Relative tolerance under which two Q values count as tied.
const TIE_TOL: f64 = 1e-12;

/// Saitou–Nei neighbor joining. Returns an unrooted binary tree whose edges
/// keep their raw (possibly negative) lengths.
///
/// Ties in the Q criterion go to the pair whose smallest leaf labels are
/// lexicographically smallest.
pub fn neighbor_joining(d: &DistanceMatrix) -> Result<PhyloTree> {
    let n = d.len();
    if n < 2 {
        return Err(Error::domain("neighbor joining needs at least two taxa"));
    }
    let mut labels: Vec<Option<String>> = d.labels().iter().cloned().map(Some).collect();
    let mut edges = Vec::with_capacity(2 * n - 3);
    // active clusters: tree node id and smallest leaf label
    let mut active: Vec<(usize, String)> = (0..n).map(|i| (i, d.labels()[i].clone())).collect();
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| d.row(i).to_vec()).collect();

    while active.len() > 2 {
        let r = active.len();
        let sums: Vec<f64> = dist.iter().map(|row| row.iter().sum()).collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..r {
            for j in i + 1..r {
                let q = (r as f64 - 2.0) * dist[i][j] - sums[i] - sums[j];
                let better = match best {
                    None => true,
                    Some((bq, bi, bj)) => {
                        let tol = TIE_TOL * bq.abs().max(q.abs()).max(1.0);
                        if q < bq - tol {
                            true
                        } else if q <= bq + tol {
                            tie_key(&active, i, j).cmp(&tie_key(&active, bi, bj)) == Ordering::Less
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((q, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("at least one pair");
        let dij = dist[i][j];
        let li = dij / 2.0 + (sums[i] - sums[j]) / (2.0 * (r as f64 - 2.0));
        let lj = dij - li;
        let u = labels.len();
        labels.push(None);
        edges.push(Edge { a: u, b: active[i].0, raw_length: li });
        edges.push(Edge { a: u, b: active[j].0, raw_length: lj });

        let new_row: Vec<f64> = (0..r).map(|k| (dist[i][k] + dist[j][k] - dij) / 2.0).collect();
        let name = active[i].1.clone().min(active[j].1.clone());
        // replace i with the new cluster, drop j (j > i)
        for k in 0..r {
            dist[i][k] = new_row[k];
            dist[k][i] = new_row[k];
        }
        dist[i][i] = 0.0;
        active[i] = (u, name);
        dist.remove(j);
        for row in &mut dist {
            row.remove(j);
        }
        active.remove(j);
    }
    edges.push(Edge {
        a: active[0].0,
        b: active[1].0,
        raw_length: dist[0][1],
    });
    PhyloTree::new(std::mem::take(&mut labels), edges, None)
}

fn tie_key<'a>(active: &'a [(usize, String)], i: usize, j: usize) -> (&'a str, &'a str) {
    let (a, b) = (active[i].1.as_str(), active[j].1.as_str());
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}
