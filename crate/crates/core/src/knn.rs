//! Exact Euclidean k-nearest-neighbor graph over pixel spectra.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::par;

/// Undirected graph with non-negative edge weights, stored as sorted
/// adjacency lists. Every edge appears in both endpoint lists with the same
/// weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    /// Builds a graph from undirected edges. Duplicate edges keep the smaller
    /// weight.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency: Vec<Vec<(usize, f64)>> = (0..n).map(|_| Vec::new()).collect();
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::IndexOutOfRange {
                    index: u.max(v),
                    n,
                });
            }
            if u == v {
                return Err(invalid!("self-edge on node {u}"));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(invalid!("edge ({u}, {v}) has invalid weight {w}"));
            }
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
        }
        for list in &mut adjacency {
            list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            list.dedup_by_key(|e| e.0);
        }
        Ok(Self { n, adjacency })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Each undirected edge once, as `(u, v, w)` with `u < v`, sorted by `(u, v)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .filter(move |&&(v, _)| v > u)
                .map(move |&(v, w)| (u, v, w))
        })
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Adds or lowers an undirected edge.
    pub fn add_edge(&mut self, u: usize, v: usize, w: f64) -> Result<()> {
        if u >= self.n || v >= self.n {
            return Err(Error::IndexOutOfRange {
                index: u.max(v),
                n: self.n,
            });
        }
        if u == v || !w.is_finite() || w < 0.0 {
            return Err(invalid!("invalid edge ({u}, {v}, {w})"));
        }
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.adjacency[a];
            match list.binary_search_by(|e| e.0.cmp(&b)) {
                Ok(pos) => list[pos].1 = list[pos].1.min(w),
                Err(pos) => list.insert(pos, (b, w)),
            }
        }
        Ok(())
    }
}

/// Default neighbor count: `max(10, ceil(2 ln n))`, capped at `n - 1`.
pub fn default_k(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(invalid!("need at least 2 points for a neighbor graph, got {n}"));
    }
    let logk = libm::ceil(2.0 * libm::log(n as f64)) as usize;
    Ok(logk.max(10).min(n - 1))
}

/// Squared Euclidean distance between two `f32` spectra, accumulated in `f64`.
///
/// Band order is fixed, so `sq_dist(a, b) == sq_dist(b, a)` bit for bit.
#[inline]
pub fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = f64::from(*x) - f64::from(*y);
        acc += d * d;
    }
    acc
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Builds the symmetrized (union) k-nearest-neighbor graph of `n` points of
/// dimension `dim`, stored row-major in `points`.
///
/// Neighbors are found by exhaustive search; equal distances prefer the lower
/// node index. Edge weights are Euclidean distances.
pub fn build_knn_graph(points: &[f32], dim: usize, k: usize) -> Result<WeightedGraph> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} values do not form rows of dimension {dim}",
            points.len()
        )));
    }
    let n = points.len() / dim;
    if n < 2 {
        return Err(invalid!("need at least 2 points, got {n}"));
    }
    if k == 0 || k >= n {
        return Err(invalid!("neighbor count k={k} must satisfy 1 <= k < n={n}"));
    }
    if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    let nearest: Vec<Vec<(f64, usize)>> = par::map_range(n, |i| {
        let xi = row(i);
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (sq_dist(xi, row(j)), j))
            .collect();
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, by_distance_then_index);
            cand.truncate(k);
        }
        cand.sort_unstable_by(by_distance_then_index);
        cand
    });

    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(n * k);
    for (i, list) in nearest.iter().enumerate() {
        for &(d2, j) in list {
            let (u, v) = if i < j { (i, j) } else { (j, i) };
            edges.push((u, v, libm::sqrt(d2)));
        }
    }
    edges.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    WeightedGraph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Full sort of the dense distance matrix, one row at a time.
    fn brute_force(points: &[f32], dim: usize, k: usize) -> Vec<(usize, usize, f64)> {
        let n = points.len() / dim;
        let mut dist = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0f64;
                for b in 0..dim {
                    let d = f64::from(points[i * dim + b]) - f64::from(points[j * dim + b]);
                    s += d * d;
                }
                dist[i][j] = s;
            }
        }
        let mut set = alloc::collections::BTreeMap::new();
        for i in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| dist[i][a].partial_cmp(&dist[i][b]).unwrap().then(a.cmp(&b)));
            for &j in order.iter().take(k) {
                set.insert((i.min(j), i.max(j)), libm::sqrt(dist[i][j]));
            }
        }
        set.into_iter().map(|((u, v), w)| (u, v, w)).collect()
    }

    #[test]
    fn default_k_rule() {
        assert_eq!(default_k(2000).unwrap(), 16);
        assert_eq!(default_k(11).unwrap(), 10);
        assert_eq!(default_k(5).unwrap(), 4);
        assert!(default_k(1).is_err());
    }

    #[test]
    fn collinear_points() {
        let g = build_knn_graph(&[0.0, 1.0, 3.0], 1, 1).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 1, 1.0), (1, 2, 2.0)]);
    }

    #[test]
    fn complete_graph_when_k_is_n_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<f32> = (0..12 * 4).map(|_| rng.random::<f32>()).collect();
        let g = build_knn_graph(&pts, 4, 11).unwrap();
        assert_eq!(g.num_edges(), 12 * 11 / 2);
        for (u, v, w) in g.edges() {
            let d = sq_dist(&pts[u * 4..u * 4 + 4], &pts[v * 4..v * 4 + 4]);
            assert_eq!(w, libm::sqrt(d));
        }
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = rng.random_range(2..200);
            let dim = rng.random_range(1..6);
            let k = rng.random_range(1..n.min(12));
            // coarse grid values to force distance ties
            let pts: Vec<f32> = (0..n * dim)
                .map(|_| if trial % 2 == 0 { rng.random_range(0..4) as f32 } else { rng.random() })
                .collect();
            let g = build_knn_graph(&pts, dim, k).unwrap();
            let got: Vec<_> = g.edges().collect();
            assert_eq!(got, brute_force(&pts, dim, k), "trial {trial}");
            for i in 0..n {
                assert!(g.degree(i) >= k);
                for &(j, w) in g.neighbors(i) {
                    assert_ne!(i, j);
                    assert!(g.neighbors(j).contains(&(i, w)));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_knn_graph(&[0.0, f32::INFINITY], 1, 1).is_err());
        assert!(build_knn_graph(&[0.0, 1.0], 1, 2).is_err());
        assert!(build_knn_graph(&[0.0, 1.0, 2.0], 2, 1).is_err());
    }

    #[test]
    fn thread_count_does_not_change_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<f32> = (0..300 * 8).map(|_| rng.random_range(0..3) as f32).collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| build_knn_graph(&pts, 8, 7).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
