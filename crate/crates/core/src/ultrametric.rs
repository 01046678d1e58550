//! Ultrametric (minimax) path distances.
//!
//! The ultrametric path distance between two nodes is the smallest possible
//! value of the longest edge over all paths joining them. It equals the
//! longest edge on the path between them in a minimum spanning forest, which
//! in turn is the merge weight stored at their lowest common ancestor in the
//! Kruskal reconstruction tree. [`BottleneckIndex`] answers queries that way
//! in constant time after `O(n log n)` preprocessing.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::knn::WeightedGraph;

/// Default node cap for [`upd_oracle`].
pub const ORACLE_CAP: usize = 300;

#[derive(Debug, Clone)]
struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Returns false if `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.rank[a] < self.rank[b] {
            core::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
        true
    }
}

/// Minimum spanning forest.
#[derive(Debug, Clone, PartialEq)]
pub struct Mst {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    component_id: Vec<usize>,
}

impl Mst {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Forest edges `(u, v, w)` with `u < v`, in Kruskal acceptance order.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Component label per node, numbered `0..` by smallest member.
    pub fn component_id(&self) -> &[usize] {
        &self.component_id
    }

    pub fn num_components(&self) -> usize {
        self.n - self.edges.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }
}

fn edge_order(a: &(usize, usize, f64), b: &(usize, usize, f64)) -> Ordering {
    a.2.total_cmp(&b.2)
        .then(a.0.cmp(&b.0))
        .then(a.1.cmp(&b.1))
}

fn label_components(n: usize, dsu: &mut DisjointSet) -> Vec<usize> {
    let mut root_label = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = dsu.find(i);
            if root_label[r] == usize::MAX {
                root_label[r] = next;
                next += 1;
            }
            root_label[r]
        })
        .collect()
}

/// Kruskal's algorithm. Ties are broken by weight, then `(u, v)`
/// lexicographically, so the forest is deterministic.
pub fn build_mst(graph: &WeightedGraph) -> Mst {
    let n = graph.n();
    let mut edges: Vec<(usize, usize, f64)> = graph.edges().collect();
    edges.sort_unstable_by(edge_order);
    let mut dsu = DisjointSet::new(n);
    let mut forest = Vec::with_capacity(n.saturating_sub(1));
    for e in edges {
        if dsu.union(e.0, e.1) {
            forest.push(e);
            if forest.len() + 1 == n {
                break;
            }
        }
    }
    let component_id = label_components(n, &mut dsu);
    Mst {
        n,
        edges: forest,
        component_id,
    }
}

/// Kruskal reconstruction tree with constant-time lowest-common-ancestor
/// lookups.
///
/// Leaves `0..n` are the graph nodes; internal node `n + t` records the
/// `t`-th merge and carries the weight of the merging edge.
#[derive(Debug, Clone)]
pub struct BottleneckIndex {
    n: usize,
    merge_weight: Vec<f64>,
    parent: Vec<usize>,
    component_id: Vec<usize>,
    first_visit: Vec<u32>,
    depth: Vec<u32>,
    // sparse[level][i] = node of minimal depth in euler[i..i + 2^level]
    sparse: Vec<Vec<u32>>,
}

impl BottleneckIndex {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn component_id(&self) -> &[usize] {
        &self.component_id
    }

    /// Weights of the internal (merge) nodes in creation order.
    pub fn merge_weights(&self) -> &[f64] {
        &self.merge_weight
    }

    /// Parent of every tree node (`usize::MAX` for roots); leaves first.
    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    /// Ultrametric path distance between nodes `i` and `j`; `+inf` when they
    /// lie in different components.
    pub fn query(&self, i: usize, j: usize) -> Result<f64> {
        for idx in [i, j] {
            if idx >= self.n {
                return Err(Error::IndexOutOfRange { index: idx, n: self.n });
            }
        }
        Ok(self.query_unchecked(i, j))
    }

    /// Same as [`query`](Self::query) without the range check.
    #[inline]
    pub fn query_unchecked(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        if self.component_id[i] != self.component_id[j] {
            return f64::INFINITY;
        }
        let (mut l, mut r) = (self.first_visit[i] as usize, self.first_visit[j] as usize);
        if l > r {
            core::mem::swap(&mut l, &mut r);
        }
        let level = (usize::BITS - 1 - (r - l + 1).leading_zeros()) as usize;
        let a = self.sparse[level][l];
        let b = self.sparse[level][r + 1 - (1 << level)];
        let lca = if self.depth[a as usize] <= self.depth[b as usize] { a } else { b } as usize;
        self.merge_weight[lca - self.n]
    }
}

/// Builds the reconstruction tree and its LCA tables from a spanning forest.
pub fn build_bottleneck_index(mst: &Mst) -> BottleneckIndex {
    let n = mst.n;
    let mut edges = mst.edges.clone();
    edges.sort_unstable_by(edge_order);
    let total = n + edges.len();

    let mut parent = vec![usize::MAX; total];
    let mut children: Vec<[usize; 2]> = Vec::with_capacity(edges.len());
    let mut merge_weight = Vec::with_capacity(edges.len());
    let mut dsu = DisjointSet::new(n);
    // tree node currently representing each union-find root
    let mut top: Vec<usize> = (0..n).collect();
    for &(u, v, w) in &edges {
        let (ru, rv) = (dsu.find(u), dsu.find(v));
        debug_assert_ne!(ru, rv, "forest edges never close a cycle");
        let node = n + merge_weight.len();
        let (a, b) = (top[ru], top[rv]);
        parent[a] = node;
        parent[b] = node;
        children.push([a, b]);
        merge_weight.push(w);
        dsu.union(ru, rv);
        let root = dsu.find(ru);
        top[root] = node;
    }
    let component_id = label_components(n, &mut dsu);

    // Euler tour over every root, in order of tree-node index.
    let mut euler: Vec<u32> = Vec::with_capacity(2 * total);
    let mut first_visit = vec![0u32; total];
    let mut depth = vec![0u32; total];
    let mut stack: Vec<(usize, u8)> = Vec::new();
    for root in (0..total).filter(|&v| parent[v] == usize::MAX) {
        stack.push((root, 0));
        while let Some(top) = stack.last_mut() {
            let (node, state) = *top;
            if state == 0 {
                first_visit[node] = euler.len() as u32;
            }
            euler.push(node as u32);
            if node >= n && state < 2 {
                top.1 += 1;
                let child = children[node - n][state as usize];
                depth[child] = depth[node] + 1;
                stack.push((child, 0));
            } else {
                stack.pop();
            }
        }
    }

    let len = euler.len();
    let mut sparse = vec![euler];
    let mut width = 1;
    while 2 * width <= len {
        let prev = sparse.last().expect("level 0 present");
        let next: Vec<u32> = (0..=len - 2 * width)
            .map(|i| {
                let (a, b) = (prev[i], prev[i + width]);
                if depth[a as usize] <= depth[b as usize] {
                    a
                } else {
                    b
                }
            })
            .collect();
        sparse.push(next);
        width *= 2;
    }

    BottleneckIndex {
        n,
        merge_weight,
        parent,
        component_id,
        first_visit,
        depth,
        sparse,
    }
}

/// Convenience: graph straight to index.
pub fn bottleneck_index_for(graph: &WeightedGraph) -> BottleneckIndex {
    build_bottleneck_index(&build_mst(graph))
}

/// Dense ultrametric distance matrix by the (min, max) Floyd–Warshall closure.
///
/// Intended as a slow reference; refuses graphs above `cap` nodes.
pub fn upd_oracle(graph: &WeightedGraph, cap: usize) -> Result<Vec<f64>> {
    let n = graph.n();
    if n > cap {
        return Err(invalid!("oracle limited to {cap} nodes, graph has {n}"));
    }
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
        for &(j, w) in graph.neighbors(i) {
            d[i * n + j] = d[i * n + j].min(w);
        }
    }
    for m in 0..n {
        for i in 0..n {
            let dim = d[i * n + m];
            if dim == f64::INFINITY {
                continue;
            }
            for j in 0..n {
                let via = dim.max(d[m * n + j]);
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    Ok(d)
}

#[derive(PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Single-source ultrametric distances by a minimax variant of Dijkstra's
/// algorithm, where a path's cost is its longest edge.
pub fn minimax_dijkstra(graph: &WeightedGraph, source: usize) -> Result<Vec<f64>> {
    let n = graph.n();
    if source >= n {
        return Err(Error::IndexOutOfRange { index: source, n });
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry(0.0, source));
    while let Some(HeapEntry(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in graph.neighbors(u) {
            let cand = d.max(w);
            if cand < dist[v] {
                dist[v] = cand;
                heap.push(HeapEntry(cand, v));
            }
        }
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> WeightedGraph {
        WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 5.0)]).unwrap()
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, ties: bool) -> WeightedGraph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < p {
                    let w = if ties {
                        rng.random_range(0..5) as f64
                    } else {
                        rng.random::<f64>()
                    };
                    edges.push((u, v, w));
                }
            }
        }
        WeightedGraph::from_edges(n, &edges).unwrap()
    }

    /// Every spanning forest of a tiny graph, by subset enumeration.
    fn min_spanning_weight_by_enumeration(g: &WeightedGraph, components: usize) -> f64 {
        let edges: Vec<_> = g.edges().collect();
        let need = g.n() - components;
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << edges.len()) {
            if mask.count_ones() as usize != need {
                continue;
            }
            let mut dsu = DisjointSet::new(g.n());
            let mut ok = true;
            let mut w = 0.0;
            for (k, e) in edges.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    ok &= dsu.union(e.0, e.1);
                    w += e.2;
                }
            }
            if ok {
                best = best.min(w);
            }
        }
        best
    }

    #[test]
    fn triangle_mst_and_upd() {
        let g = triangle();
        let mst = build_mst(&g);
        assert_eq!(mst.edges(), &[(0, 1, 1.0), (1, 2, 2.0)]);
        let idx = build_bottleneck_index(&mst);
        assert_eq!(idx.query(0, 2).unwrap(), 2.0);
        assert_eq!(idx.query(1, 1).unwrap(), 0.0);
        assert_eq!(upd_oracle(&g, ORACLE_CAP).unwrap()[2], 2.0);
    }

    #[test]
    fn tree_input_is_returned_unchanged() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 3.0), (1, 2, 1.0), (1, 3, 2.0)]).unwrap();
        let mut got = build_mst(&g).edges().to_vec();
        got.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        assert_eq!(got, g.edges().collect::<Vec<_>>());
    }

    #[test]
    fn disconnected_edges_form_two_components() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (2, 3, 4.0)]).unwrap();
        let mst = build_mst(&g);
        assert_eq!(mst.edges().len(), 2);
        assert_eq!(mst.num_components(), 2);
        assert_eq!(mst.component_id(), &[0, 0, 1, 1]);
        let idx = build_bottleneck_index(&mst);
        assert_eq!(idx.query(0, 3).unwrap(), f64::INFINITY);
        assert_eq!(idx.query(2, 3).unwrap(), 4.0);
        // one root per component
        let roots = idx.parents().iter().filter(|&&p| p == usize::MAX).count();
        assert_eq!(roots, 2);
    }

    #[test]
    fn single_edge_and_chain_roots() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 0.7)]).unwrap();
        let idx = bottleneck_index_for(&g);
        assert_eq!(idx.merge_weights().last(), Some(&0.7));

        let g = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 5.0), (2, 3, 2.0)]).unwrap();
        let idx = bottleneck_index_for(&g);
        let root = idx.parents().iter().position(|&p| p == usize::MAX).unwrap();
        assert_eq!(idx.merge_weights()[root - 4], 5.0);
        assert_eq!(idx.query(0, 3).unwrap(), 5.0);
        assert_eq!(idx.query(2, 3).unwrap(), 2.0);
    }

    #[test]
    fn out_of_range_query() {
        let idx = bottleneck_index_for(&triangle());
        assert!(matches!(idx.query(0, 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn oracle_cap_and_simple_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_graph(&mut rng, 20, 0.5, false);
        assert!(upd_oracle(&g, 10).is_err());

        let edges: Vec<_> = (0..5)
            .flat_map(|u| ((u + 1)..5).map(move |v| (u, v, 0.3)))
            .collect();
        let complete = WeightedGraph::from_edges(5, &edges).unwrap();
        let d = upd_oracle(&complete, ORACLE_CAP).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(d[i * 5 + j], if i == j { 0.0 } else { 0.3 });
            }
        }
        let path: Vec<_> = (0..6).map(|u| (u, u + 1, 1.0)).collect();
        let d = upd_oracle(&WeightedGraph::from_edges(7, &path).unwrap(), ORACLE_CAP).unwrap();
        assert!((0..49).all(|k| d[k] == if k % 8 == 0 { 0.0 } else { 1.0 }));
    }

    #[test]
    fn mst_weight_is_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let n = rng.random_range(2..7);
            let g = random_graph(&mut rng, n, 0.6, true);
            if g.num_edges() > 14 {
                continue;
            }
            let mst = build_mst(&g);
            let best = min_spanning_weight_by_enumeration(&g, mst.num_components());
            assert!((mst.total_weight() - best).abs() < 1e-12);
        }
    }

    /// Longest edge on the unique forest path, by walking the forest.
    fn max_on_forest_path(mst: &Mst, s: usize, t: usize) -> f64 {
        let mut adj = vec![Vec::new(); mst.n()];
        for &(u, v, w) in mst.edges() {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        let mut best = vec![f64::NAN; mst.n()];
        best[s] = 0.0;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &(v, w) in &adj[u] {
                if best[v].is_nan() {
                    best[v] = best[u].max(w);
                    stack.push(v);
                }
            }
        }
        if best[t].is_nan() {
            f64::INFINITY
        } else {
            best[t]
        }
    }

    #[test]
    fn index_agrees_with_oracles_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = rng.random_range(1..=50);
            let p = rng.random_range(0.02..0.4);
            let g = random_graph(&mut rng, n, p, trial % 3 == 0);
            let mst = build_mst(&g);
            let idx = build_bottleneck_index(&mst);
            let oracle = upd_oracle(&g, ORACLE_CAP).unwrap();
            for i in 0..n {
                let dj = minimax_dijkstra(&g, i).unwrap();
                for j in 0..n {
                    let q = idx.query(i, j).unwrap();
                    assert_eq!(q, oracle[i * n + j], "trial {trial} ({i},{j})");
                    assert_eq!(q, dj[j]);
                    assert_eq!(q, idx.query(j, i).unwrap());
                    assert_eq!(q, max_on_forest_path(&mst, i, j));
                    assert_eq!(q == f64::INFINITY, mst.component_id()[i] != mst.component_id()[j]);
                    if i != j && g.degree(i) > 0 {
                        let min_inc = g.neighbors(i).iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
                        assert!(q >= min_inc);
                    }
                }
            }
        }
    }

    #[test]
    fn ultrametric_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.random_range(2..25);
            let g = random_graph(&mut rng, n, 0.3, false);
            let idx = bottleneck_index_for(&g);
            for i in 0..n {
                for j in 0..n {
                    for m in 0..n {
                        let (a, b, c) = (
                            idx.query(i, j).unwrap(),
                            idx.query(i, m).unwrap(),
                            idx.query(m, j).unwrap(),
                        );
                        assert!(a <= b.max(c));
                    }
                }
            }
        }
    }

    #[test]
    fn merge_weights_increase_towards_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_graph(&mut rng, 60, 0.1, false);
        let idx = bottleneck_index_for(&g);
        let n = idx.n();
        for (node, &p) in idx.parents().iter().enumerate() {
            if p != usize::MAX && node >= n {
                assert!(idx.merge_weights()[node - n] <= idx.merge_weights()[p - n]);
            }
        }
    }

    #[test]
    fn adding_edges_never_increases_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let n = rng.random_range(2..30);
            let mut g = random_graph(&mut rng, n, 0.15, false);
            let before = bottleneck_index_for(&g);
            let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
            if u == v {
                continue;
            }
            g.add_edge(u, v, rng.random::<f64>()).unwrap();
            let after = bottleneck_index_for(&g);
            for i in 0..n {
                for j in 0..n {
                    assert!(after.query(i, j).unwrap() <= before.query(i, j).unwrap());
                }
            }
        }
    }
}
