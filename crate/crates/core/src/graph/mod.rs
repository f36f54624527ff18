//! Undirected simple graphs with optional per-vertex self-loops.
//!
//! The same type backs the interference network `G` and the conflict graph
//! `H`. Neighbor lists never contain the vertex itself; a self-loop is a flag.

mod generators;
mod io;
mod spectral;

pub use generators::{
    clique, clique_of_cliques, erdos_renyi, hub_cliques, path, preferential_attachment, star, HubCliquesLayout,
};
pub use io::{parse_edge_list, read_edge_list, write_edge_list};
pub use spectral::{largest_eigenvalue, SpectralResult, DEFAULT_MAX_ITER, DEFAULT_TOL};

use crate::error::{Error, Result};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    self_loops: Vec<bool>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Duplicate and reversed
    /// pairs collapse into one edge; `(i, i)` is rejected.
    ///
    /// `self_loops` must be empty (no loops) or have one flag per vertex.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)], self_loops: &[bool]) -> Result<Self> {
        if !self_loops.is_empty() && self_loops.len() != n {
            return Err(Error::Dimension { expected: n, got: self_loops.len() });
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in edges {
            for v in [i, j] {
                if v >= n {
                    return Err(Error::VertexOutOfRange { vertex: v, n });
                }
            }
            if i == j {
                return Err(Error::SelfLoopEdge(i));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let self_loops = if self_loops.is_empty() { vec![false; n] } else { self_loops.to_vec() };
        Ok(Self { adjacency, self_loops })
    }

    /// Loop-free graph from an edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edge_list(n, edges, &[])
    }

    /// Graph with `n` isolated vertices.
    pub fn empty(n: usize) -> Self {
        Self { adjacency: vec![Vec::new(); n], self_loops: vec![false; n] }
    }

    pub(crate) fn from_sorted_adjacency(adjacency: Vec<Vec<usize>>, self_loops: Vec<bool>) -> Self {
        debug_assert_eq!(adjacency.len(), self_loops.len());
        Self { adjacency, self_loops }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Sorted neighbors of `i`, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_self_loop(&self, i: usize) -> bool {
        self.self_loops[i]
    }

    pub fn self_loops(&self) -> &[bool] {
        &self.self_loops
    }

    /// Degree in the simple graph (self-loop not counted).
    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Degree counting a self-loop as one.
    pub fn loop_degree(&self, i: usize) -> usize {
        self.adjacency[i].len() + usize::from(self.self_loops[i])
    }

    pub fn max_loop_degree(&self) -> usize {
        (0..self.n()).map(|i| self.loop_degree(i)).max().unwrap_or(0)
    }

    pub fn avg_loop_degree(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (0..self.n()).map(|i| self.loop_degree(i)).sum::<usize>() as f64 / self.n() as f64
    }

    /// Number of non-loop edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Non-loop edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Adjacency test; `is_adjacent(i, i)` reports the self-loop flag.
    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        if i == j {
            self.self_loops[i]
        } else {
            self.adjacency[i].binary_search(&j).is_ok()
        }
    }

    /// Closed neighborhood `{i} ∪ N(i)`, sorted.
    pub fn closed_neighborhood(&self, i: usize) -> Vec<usize> {
        let list = &self.adjacency[i];
        let pos = list.partition_point(|&j| j < i);
        let mut out = Vec::with_capacity(list.len() + 1);
        out.extend_from_slice(&list[..pos]);
        out.push(i);
        out.extend_from_slice(&list[pos..]);
        out
    }

    /// Copy with a self-loop on every vertex.
    pub fn with_all_self_loops(&self) -> Self {
        Self { adjacency: self.adjacency.clone(), self_loops: vec![true; self.n()] }
    }

    /// Copy with every self-loop removed.
    pub fn without_self_loops(&self) -> Self {
        Self { adjacency: self.adjacency.clone(), self_loops: vec![false; self.n()] }
    }

    pub fn has_non_loop_edges(&self) -> bool {
        self.adjacency.iter().any(|l| !l.is_empty())
    }

    /// Connected components, each sorted, ordered by their minimum vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Vertices within `radius` hops of `i` (including `i` at distance 0),
    /// in BFS order.
    pub fn ball(&self, i: usize, radius: usize) -> Vec<(usize, usize)> {
        let mut out = vec![(i, 0)];
        let mut head = 0;
        let mut seen = std::collections::HashSet::new();
        seen.insert(i);
        while head < out.len() {
            let (v, d) = out[head];
            head += 1;
            if d == radius {
                continue;
            }
            for &w in &self.adjacency[v] {
                if seen.insert(w) {
                    out.push((w, d + 1));
                }
            }
        }
        out
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n() })
        }
    }
}

/// Square of a graph: `i ~ j` iff `0 < d(i, j) <= 2`, with a self-loop on
/// every vertex.
pub fn power_graph_two(g: &Graph) -> Graph {
    let n = g.n();
    let mut mark = vec![usize::MAX; n];
    let mut adjacency = Vec::with_capacity(n);
    for i in 0..n {
        mark[i] = i;
        let mut list = Vec::new();
        for &j in g.neighbors(i) {
            if mark[j] != i {
                mark[j] = i;
                list.push(j);
            }
            for &k in g.neighbors(j) {
                if mark[k] != i {
                    mark[k] = i;
                    list.push(k);
                }
            }
        }
        list.sort_unstable();
        adjacency.push(list);
    }
    Graph::from_sorted_adjacency(adjacency, vec![true; n])
}

/// Number of walks of length `s` from `i` to `j` over the non-loop edges,
/// i.e. `(A^s)_{ij}` for the loop-free adjacency matrix.
pub fn walk_count(g: &Graph, i: usize, j: usize, s: usize) -> Result<u64> {
    if !(1..=4).contains(&s) {
        return Err(Error::WalkLength(s));
    }
    g.check_vertex(i)?;
    g.check_vertex(j)?;
    // Sparse frontier of walk counts keyed by endpoint.
    let mut frontier: std::collections::HashMap<usize, u64> = std::collections::HashMap::new();
    frontier.insert(i, 1);
    for _ in 0..s {
        let mut next = std::collections::HashMap::with_capacity(frontier.len() * 2);
        for (&v, &c) in &frontier {
            for &w in g.neighbors(v) {
                *next.entry(w).or_insert(0) += c;
            }
        }
        frontier = next;
    }
    Ok(frontier.get(&j).copied().unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::from_edge_list(3, &[(0, 1), (1, 2), (0, 2)], &[true; 3]).unwrap()
    }

    #[test]
    fn triangle_with_loops() {
        let g = triangle();
        assert_eq!(g.edge_count(), 3);
        assert!((0..3).all(|i| g.has_self_loop(i) && g.loop_degree(i) == 3));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = Graph::from_edges(2, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn out_of_range_rejected() {
        let err = Graph::from_edges(3, &[(0, 3)]).unwrap_err();
        assert!(matches!(err, Error::VertexOutOfRange { vertex: 3, n: 3 }));
    }

    #[test]
    fn loop_edge_rejected() {
        assert!(matches!(Graph::from_edges(3, &[(1, 1)]), Err(Error::SelfLoopEdge(1))));
    }

    #[test]
    fn square_of_path_is_triangle() {
        let p = path(3);
        let sq = power_graph_two(&p);
        assert_eq!(sq, triangle());
    }

    #[test]
    fn square_of_edgeless_keeps_loops_only() {
        let sq = power_graph_two(&Graph::empty(4));
        assert_eq!(sq.edge_count(), 0);
        assert!((0..4).all(|i| sq.has_self_loop(i)));
    }

    #[test]
    fn square_of_star_is_complete() {
        let sq = power_graph_two(&star(5));
        assert_eq!(sq, clique(5).with_all_self_loops());
    }

    #[test]
    fn square_matches_distance_check() {
        // brute: BFS distances
        let g = Graph::from_edges(7, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 5), (5, 6)]).unwrap();
        let sq = power_graph_two(&g);
        for i in 0..7 {
            let ball: std::collections::HashMap<_, _> = g.ball(i, 7).into_iter().collect();
            for j in 0..7 {
                if i != j {
                    let d = ball.get(&j).copied().unwrap_or(usize::MAX);
                    assert_eq!(sq.is_adjacent(i, j), d <= 2, "{i} {j}");
                }
            }
        }
    }

    #[test]
    fn walk_counts_small() {
        let t = triangle();
        assert_eq!(walk_count(&t, 0, 1, 2).unwrap(), 1);
        assert_eq!(walk_count(&t, 0, 1, 1).unwrap(), 1);
        let p = path(3);
        assert_eq!(walk_count(&p, 0, 2, 3).unwrap(), 0);
        assert_eq!(walk_count(&p, 0, 2, 2).unwrap(), 1);
        assert!(matches!(walk_count(&p, 0, 2, 5), Err(Error::WalkLength(5))));
        assert!(matches!(walk_count(&p, 0, 2, 0), Err(Error::WalkLength(0))));
    }

    #[test]
    fn closed_neighborhood_sorted() {
        let s = star(4);
        assert_eq!(s.closed_neighborhood(0), vec![0, 1, 2, 3]);
        assert_eq!(s.closed_neighborhood(2), vec![0, 2]);
    }

    #[test]
    fn components_ordered_by_min_vertex() {
        let g = Graph::from_edges(6, &[(4, 5), (0, 3), (2, 1)]).unwrap();
        assert_eq!(g.components(), vec![vec![0, 3], vec![1, 2], vec![4, 5]]);
    }
}
