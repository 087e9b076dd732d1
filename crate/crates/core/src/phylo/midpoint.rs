use super::tree::{Edge, PhyloTree};
use crate::error::{Error, Result};

const TIE_TOL: f64 = 1e-12;

/// Roots an unrooted tree at the midpoint of its longest leaf-to-leaf path,
/// using raw branch lengths.
///
/// The longest path is chosen with lexicographic tie-breaking on its end
/// labels. The root is always a new degree-2 node; when the midpoint falls
/// on an existing node the adjacent edge toward the later leaf is split with
/// a zero-length part.
pub fn midpoint_root(t: &PhyloTree) -> Result<PhyloTree> {
    if t.is_rooted() {
        return Err(Error::domain("tree is already rooted"));
    }
    let leaves = t.leaves();
    if leaves.len() < 2 {
        return Err(Error::domain("midpoint rooting needs at least two leaves"));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, &a) in leaves.iter().enumerate() {
        let d = t.distances_from(a);
        for &b in &leaves[i + 1..] {
            let len = d[b];
            // leaves are label-sorted, so the first pair seen wins ties
            let better = match best {
                None => true,
                Some((bl, _, _)) => len > bl + TIE_TOL * bl.abs().max(1.0),
            };
            if better {
                best = Some((len, a, b));
            }
        }
    }
    let (total, a, b) = best.unwrap();
    let half = total / 2.0;
    let path = t.path(a, b);
    let mut cum = 0.0;
    let mut split = None;
    for w in path.windows(2) {
        let k = t.edge_between(w[0], w[1]).expect("path follows edges");
        let len = t.edges()[k].raw_length;
        let next = cum + len;
        if (cum <= half && half < next) || (next <= half && half < cum) {
            split = Some((w[0], w[1], k, half - cum));
            break;
        }
        cum = next;
    }
    // half == total only when the path has non-positive length
    let (u, v, k, near) = split.unwrap_or_else(|| {
        let (u, v) = (path[path.len() - 2], path[path.len() - 1]);
        let k = t.edge_between(u, v).unwrap();
        (u, v, k, t.edges()[k].raw_length)
    });
    let far = t.edges()[k].raw_length - near;

    let mut labels: Vec<Option<String>> = (0..t.node_count()).map(|i| t.label(i).map(str::to_string)).collect();
    let root = labels.len();
    labels.push(None);
    let mut edges: Vec<Edge> = t
        .edges()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, e)| e.clone())
        .collect();
    edges.push(Edge { a: root, b: u, raw_length: near });
    edges.push(Edge { a: root, b: v, raw_length: far });
    PhyloTree::new(labels, edges, Some(root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::DistanceMatrix;
    use crate::phylo::neighbor_joining;

    fn root_edges(t: &PhyloTree) -> Vec<f64> {
        let r = t.root().unwrap();
        let mut v: Vec<f64> = t
            .edges()
            .iter()
            .filter(|e| e.a == r || e.b == r)
            .map(|e| e.raw_length)
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn two_leaves_split_evenly() {
        let d = DistanceMatrix::new(vec!["A".into(), "B".into()], vec![0.0, 4.0, 4.0, 0.0]).unwrap();
        let t = midpoint_root(&neighbor_joining(&d).unwrap()).unwrap();
        assert_eq!(root_edges(&t), vec![2.0, 2.0]);
        assert!(midpoint_root(&t).is_err());
    }

    #[test]
    fn balanced_quartet_roots_on_central_edge() {
        // ((A:1,B:1):0.5,(C:1,D:1):0.5)
        let p = [
            [0.0, 2.0, 3.0, 3.0],
            [2.0, 0.0, 3.0, 3.0],
            [3.0, 3.0, 0.0, 2.0],
            [3.0, 3.0, 2.0, 0.0],
        ];
        let d = DistanceMatrix::new(["A", "B", "C", "D"].map(String::from).to_vec(), p.concat()).unwrap();
        let u = neighbor_joining(&d).unwrap();
        let t = midpoint_root(&u).unwrap();
        assert_eq!(root_edges(&t), vec![0.5, 0.5]);
        let r = t.root().unwrap();
        let adj = t.adjacency();
        assert!(adj[r].iter().all(|&(v, _)| t.label(v).is_none()));
        let (_, before) = u.path_lengths();
        let (_, after) = t.path_lengths();
        for (x, y) in before.iter().zip(&after) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rerooting_is_stable() {
        let p = [
            [0.0, 3.0, 3.0, 7.0, 6.0],
            [3.0, 0.0, 4.0, 8.0, 7.0],
            [3.0, 4.0, 0.0, 6.0, 5.0],
            [7.0, 8.0, 6.0, 0.0, 3.0],
            [6.0, 7.0, 5.0, 3.0, 0.0],
        ];
        let d = DistanceMatrix::new(["A", "B", "C", "D", "E"].map(String::from).to_vec(), p.concat()).unwrap();
        let once = midpoint_root(&neighbor_joining(&d).unwrap()).unwrap();
        let twice = midpoint_root(&once.unroot()).unwrap();
        assert_eq!(root_edges(&once), root_edges(&twice));
        // longest path B-D has length 8; root sits 4 from both
        let dist = once.distances_from(once.root().unwrap());
        let leaf = |l: &str| (0..once.node_count()).find(|&i| once.label(i) == Some(l)).unwrap();
        assert!((dist[leaf("B")] - 4.0).abs() < 1e-12);
        assert!((dist[leaf("D")] - 4.0).abs() < 1e-12);
    }
}
