//! Set partitions, labeled graphs and labeled trees over index labels.

use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default cap for tree enumeration.
pub const TREE_CAP: usize = 9;
/// Connected-graph enumeration filters all `2^{n(n-1)/2}` graphs.
pub const CONNECTED_GRAPH_CAP: usize = 5;

/// Simple undirected graph on `0..vertex_count`, edges stored as sorted `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl LabeledGraph {
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut e: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a == b || a >= vertex_count || b >= vertex_count {
                return Err(Error::InvalidModel(format!("bad edge ({a}, {b}) on {vertex_count} vertices")));
            }
            e.push((a.min(b), a.max(b)));
        }
        e.sort_unstable();
        let before = e.len();
        e.dedup();
        if e.len() != before {
            return Err(Error::InvalidModel("duplicate edge".into()));
        }
        Ok(Self { vertex_count, edges: e })
    }

    pub fn empty(vertex_count: usize) -> Self {
        Self {
            vertex_count,
            edges: vec![],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        connected_components(self).len() <= 1
    }
}

/// One connected component, in the labels of the parent graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl Component {
    /// The component relabeled to `0..vertices.len()`.
    pub fn graph(&self) -> LabeledGraph {
        let index = |v: usize| self.vertices.binary_search(&v).expect("edge endpoint in component");
        LabeledGraph {
            vertex_count: self.vertices.len(),
            edges: self.edges.iter().map(|&(a, b)| (index(a), index(b))).collect(),
        }
    }
}

pub fn connected_components(g: &LabeledGraph) -> Vec<Component> {
    let mut uf = UnionFind::<usize>::new(g.vertex_count);
    for &(a, b) in &g.edges {
        uf.union(a, b);
    }
    let labels = uf.into_labeling();
    let mut comps: Vec<Component> = Vec::new();
    let mut slot = vec![usize::MAX; g.vertex_count];
    for v in 0..g.vertex_count {
        let root = labels[v];
        if slot[root] == usize::MAX {
            slot[root] = comps.len();
            comps.push(Component {
                vertices: vec![],
                edges: vec![],
            });
        }
        comps[slot[root]].vertices.push(v);
    }
    for &(a, b) in &g.edges {
        comps[slot[labels[a]]].edges.push((a, b));
    }
    comps
}

/// Ordered `p`-tuples of disjoint blocks (bitmasks) covering `0..n`.
/// With `allow_empty` there are `p^n` of them, otherwise only surjections.
pub fn partitions(n: usize, p: usize, allow_empty: bool) -> impl Iterator<Item = Vec<u64>> {
    assert!(p >= 1, "need at least one part");
    assert!(n < 64);
    let total = (p as u128).pow(n as u32);
    (0..total).filter_map(move |mut code| {
        let mut blocks = vec![0u64; p];
        for i in 0..n {
            blocks[(code % p as u128) as usize] |= 1 << i;
            code /= p as u128;
        }
        if !allow_empty && blocks.iter().any(|b| *b == 0) {
            None
        } else {
            Some(blocks)
        }
    })
}

/// Edges of the tree with Prüfer sequence `seq` on `seq.len() + 2` vertices.
pub fn prufer_decode(seq: &[usize]) -> Vec<(usize, usize)> {
    let n = seq.len() + 2;
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf always exists");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges.sort_unstable();
    edges
}

pub fn enumerate_trees(n: usize) -> Result<impl Iterator<Item = LabeledGraph>> {
    enumerate_trees_capped(n, TREE_CAP)
}

/// Every labeled tree on `n` vertices exactly once, by Prüfer decoding.
pub fn enumerate_trees_capped(n: usize, cap: usize) -> Result<impl Iterator<Item = LabeledGraph>> {
    if n > cap {
        return Err(Error::SizeLimit {
            what: "tree enumeration",
            size: n,
            cap,
        });
    }
    assert!(n >= 1, "trees need at least one vertex");
    let len = n.saturating_sub(2);
    let total: u64 = if n <= 2 { 1 } else { (n as u64).pow(len as u32) };
    Ok((0..total).map(move |mut code| {
        if n == 1 {
            return LabeledGraph::empty(1);
        }
        let mut seq = vec![0usize; len];
        for s in seq.iter_mut() {
            *s = (code % n as u64) as usize;
            code /= n as u64;
        }
        LabeledGraph {
            vertex_count: n,
            edges: prufer_decode(&seq),
        }
    }))
}

fn mask_connected(n: usize, adjacency: &[u32]) -> bool {
    if n == 0 {
        return true;
    }
    let full = (1u32 << n) - 1;
    let mut seen = 1u32;
    let mut frontier = 1u32;
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let new = adjacency[v] & !seen;
        seen |= new;
        frontier |= new;
    }
    seen == full
}

/// Every connected labeled graph on `n <= 5` vertices, by filtering all graphs.
pub fn enumerate_connected_graphs(n: usize) -> Result<impl Iterator<Item = LabeledGraph>> {
    if n > CONNECTED_GRAPH_CAP {
        return Err(Error::SizeLimit {
            what: "connected graph enumeration",
            size: n,
            cap: CONNECTED_GRAPH_CAP,
        });
    }
    assert!(n >= 1, "graphs need at least one vertex");
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let total = 1u64 << pairs.len();
    Ok((0..total).filter_map(move |mask| {
        let mut adjacency = vec![0u32; n];
        let mut edges = Vec::new();
        for (k, &(i, j)) in pairs.iter().enumerate() {
            if mask >> k & 1 == 1 {
                adjacency[i] |= 1 << j;
                adjacency[j] |= 1 << i;
                edges.push((i, j));
            }
        }
        mask_connected(n, &adjacency).then_some(LabeledGraph { vertex_count: n, edges })
    }))
}

/// `sum over spanning trees of the complete graph on 0..n of prod w(i, j)`
/// for nonnegative weights, by the matrix-tree theorem.
///
/// The reduced Laplacian is eliminated vertex by vertex. Each Schur complement
/// is again a Laplacian with extra weight to the removed vertex 0, so pivots are
/// rebuilt as sums of off-diagonal weights and nothing is ever subtracted. The
/// result keeps full relative accuracy even when the sum is tiny next to
/// individual weights.
pub fn weighted_tree_sum<T: Scalar>(n: usize, weight: impl Fn(usize, usize) -> T) -> T {
    if n <= 1 {
        return T::one();
    }
    let mut w = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = weight(i, j);
            debug_assert!(v >= T::zero(), "tree weights must be nonnegative");
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    let mut det = T::one();
    for k in (1..n).rev() {
        let pivot = (0..k).fold(T::zero(), |acc, j| acc + w[k * n + j]);
        if pivot == T::zero() {
            return T::zero();
        }
        det *= pivot;
        for i in 0..k {
            let wik = w[i * n + k];
            if wik == T::zero() {
                continue;
            }
            for j in 0..k {
                if j != i {
                    let v = w[i * n + j] + wik * w[k * n + j] / pivot;
                    w[i * n + j] = v;
                }
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn partition_counts() {
        assert_eq!(partitions(0, 2, true).collect::<Vec<_>>(), vec![vec![0, 0]]);
        assert_eq!(partitions(2, 2, true).count(), 4);
        assert_eq!(partitions(3, 2, false).count(), 6);
        assert_eq!(partitions(4, 3, false).count(), 36);
        for blocks in partitions(4, 3, true) {
            assert_eq!(blocks.iter().fold(0, |a, b| a | b), 0b1111);
            assert_eq!(blocks.iter().map(|b| b.count_ones()).sum::<u32>(), 4);
        }
    }

    #[test]
    fn trees_are_distinct_and_spanning() {
        for n in 1..=6usize {
            let trees: Vec<_> = enumerate_trees(n).unwrap().collect();
            let expected = if n == 1 { 1 } else { n.pow(n as u32 - 2) };
            assert_eq!(trees.len(), expected);
            let set: HashSet<_> = trees.iter().cloned().collect();
            assert_eq!(set.len(), expected);
            for t in &trees {
                assert_eq!(t.edges().len(), n - 1);
                assert!(t.is_connected());
            }
        }
        assert!(matches!(enumerate_trees(10), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn connected_graph_counts() {
        let counts: Vec<usize> = (1..=5).map(|n| enumerate_connected_graphs(n).unwrap().count()).collect();
        assert_eq!(counts, vec![1, 1, 4, 38, 728]);
        assert!(enumerate_connected_graphs(6).is_err());
    }

    #[test]
    fn components_examples() {
        assert_eq!(connected_components(&LabeledGraph::empty(3)).len(), 3);
        let g = LabeledGraph::new(3, [(0, 1)]).unwrap();
        let c = connected_components(&g);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].vertices, vec![0, 1]);
        assert_eq!(c[1].vertices, vec![2]);
        for comp in &c {
            assert_eq!(connected_components(&comp.graph()).len(), 1);
        }
    }

    #[test]
    fn kirchhoff_counts_cayley() {
        for n in 1..=8usize {
            let t = weighted_tree_sum(n, |_, _| 1.0f64);
            let expected = if n == 1 { 1.0 } else { (n as f64).powi(n as i32 - 2) };
            assert!((t - expected).abs() < 1e-9 * expected, "n = {n}: {t}");
        }
    }

    #[test]
    fn kirchhoff_is_relatively_accurate_for_tiny_sums() {
        // one heavy edge next to two tiny ones: the cofactor `(a + c)(b + c) - c^2`
        // loses every digit of `ab` when computed by plain elimination
        let (a, b, c) = (1e-9f64, 3e-9, 1.0);
        let w = |i: usize, j: usize| match (i, j) {
            (0, 1) => a,
            (0, 2) => b,
            _ => c,
        };
        let t = weighted_tree_sum(3, w);
        let exact = a * c + b * c + a * b;
        assert!((t - exact).abs() <= 4.0 * f64::EPSILON * exact);
    }

    #[test]
    fn kirchhoff_matches_enumeration_with_weights() {
        let w = |i: usize, j: usize| 0.1 + ((i * 7 + j * 3) % 5) as f64 * 0.37;
        for n in 2..=6 {
            let brute: f64 = enumerate_trees(n)
                .unwrap()
                .map(|t| t.edges().iter().map(|&(a, b)| w(a, b)).product::<f64>())
                .sum();
            let k = weighted_tree_sum(n, w);
            assert!((brute - k).abs() < 1e-12 * brute);
        }
    }
}
