//! Importance orderings over a conflict graph.
//!
//! Position 0 is the most important unit. For each unit the ordering caches
//! its more important conflict neighbors (`before`) and less important ones
//! (`after`, its children). Self-loops never count as neighbors here.

use crate::error::{Error, Result};
use crate::graph::{Graph, SpectralResult};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Relative tolerance under which two Perron entries count as tied.
pub const PERRON_TIE_TOL: f64 = 1e-9;

/// Slack allowed in `|N_b(i)| <= λ - 1`.
pub const IMPORTANCE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportanceOrdering {
    order: Vec<usize>,
    position: Vec<usize>,
    before: Vec<Vec<usize>>,
    after: Vec<Vec<usize>>,
}

impl ImportanceOrdering {
    /// Wraps an arbitrary permutation (most important first) of `h`'s vertices.
    /// Does not check the importance property; see [`verify_importance`].
    pub fn from_order(h: &Graph, order: Vec<usize>) -> Result<Self> {
        let n = h.n();
        if order.len() != n {
            return Err(Error::Dimension { expected: n, got: order.len() });
        }
        let mut position = vec![usize::MAX; n];
        for (p, &v) in order.iter().enumerate() {
            if v >= n || position[v] != usize::MAX {
                return Err(Error::Ordering(format!("not a permutation of 0..{n}")));
            }
            position[v] = p;
        }
        let mut before = Vec::with_capacity(n);
        let mut after = Vec::with_capacity(n);
        for i in 0..n {
            let (b, a): (Vec<usize>, Vec<usize>) = h.neighbors(i).iter().partition(|&&j| position[j] < position[i]);
            before.push(b);
            after.push(a);
        }
        Ok(Self { order, position, before, after })
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Vertices from most to least important.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Zero-based position of `i` (0 = most important).
    pub fn position(&self, i: usize) -> usize {
        self.position[i]
    }

    /// More important conflict neighbors `N_b(i)`, sorted by vertex id.
    pub fn before(&self, i: usize) -> &[usize] {
        &self.before[i]
    }

    /// Less important conflict neighbors `N_a(i)`, sorted by vertex id.
    pub fn after(&self, i: usize) -> &[usize] {
        &self.after[i]
    }

    pub fn max_before(&self) -> usize {
        self.before.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Copy with the order reversed.
    pub fn reversed(&self, h: &Graph) -> Self {
        let mut order = self.order.clone();
        order.reverse();
        Self::from_order(h, order).expect("reversal of a permutation")
    }
}

/// Sorts each component by Perron entry (descending; near-ties broken by
/// vertex id) and concatenates components by their minimum vertex id.
pub fn eigenvector_ordering(h: &Graph, spec: &SpectralResult) -> Result<ImportanceOrdering> {
    if spec.vector.len() != h.n() {
        return Err(Error::Dimension { expected: h.n(), got: spec.vector.len() });
    }
    let v = &spec.vector;
    let mut order = Vec::with_capacity(h.n());
    for comp in h.components() {
        let mut sorted = comp;
        sorted.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        // Re-sort runs of numerically tied entries by id.
        let mut start = 0;
        while start < sorted.len() {
            let mut end = start + 1;
            while end < sorted.len() {
                let (x, y) = (v[sorted[end - 1]], v[sorted[end]]);
                if (x - y).abs() <= PERRON_TIE_TOL * x.abs().max(y.abs()) {
                    end += 1;
                } else {
                    break;
                }
            }
            sorted[start..end].sort_unstable();
            start = end;
        }
        order.extend(sorted);
    }
    ImportanceOrdering::from_order(h, order)
}

/// Repeatedly removes a minimum-degree vertex and gives it the last free
/// position. Ties peel the largest id first, so tied vertices end up in
/// ascending id order.
pub fn sequential_degree_ordering(h: &Graph) -> ImportanceOrdering {
    let n = h.n();
    let mut degree: Vec<usize> = (0..n).map(|i| h.degree(i)).collect();
    let mut removed = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, Reverse<usize>)>> =
        (0..n).map(|i| Reverse((degree[i], Reverse(i)))).collect();
    let mut order = vec![0usize; n];
    let mut slot = n;
    while let Some(Reverse((d, Reverse(v)))) = heap.pop() {
        if removed[v] || d != degree[v] {
            continue;
        }
        removed[v] = true;
        slot -= 1;
        order[slot] = v;
        for &w in h.neighbors(v) {
            if !removed[w] {
                degree[w] -= 1;
                heap.push(Reverse((degree[w], Reverse(w))));
            }
        }
    }
    debug_assert_eq!(slot, 0);
    ImportanceOrdering::from_order(h, order).expect("peeling yields a permutation")
}

/// Whether every unit has at most `λ - 1` more important conflict neighbors.
pub fn verify_importance(h: &Graph, ord: &ImportanceOrdering, lambda: f64) -> bool {
    if ord.n() != h.n() {
        return false;
    }
    (ord.max_before() as f64) <= lambda - 1.0 + IMPORTANCE_SLACK
}

fn mask(n: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &v in set {
        m[v] = true;
    }
    m
}

/// `|F_{A,B}|`: edges of `g` inside `A ∪ B` whose endpoints fall in different
/// parts of the partition `{A ∩ B, A \ B, B \ A}`.
pub fn boundary_edges(g: &Graph, a: &[usize], b: &[usize]) -> usize {
    let (in_a, in_b) = (mask(g.n(), a), mask(g.n(), b));
    let class = |v: usize| match (in_a[v], in_b[v]) {
        (true, true) => Some(0),
        (true, false) => Some(1),
        (false, true) => Some(2),
        (false, false) => None,
    };
    g.edges().filter(|&(u, v)| matches!((class(u), class(v)), (Some(x), Some(y)) if x != y)).count()
}

/// `Σ_{k ∈ R_{A,B}} |N_a(k) ∩ A| · |N_a(k) ∩ B|`, where `R_{A,B}` holds the
/// vertices outside `A ∪ B` with children in both sets.
pub fn common_parent_products(ord: &ImportanceOrdering, a: &[usize], b: &[usize]) -> usize {
    let n = ord.n();
    let (in_a, in_b) = (mask(n, a), mask(n, b));
    (0..n)
        .filter(|&k| !in_a[k] && !in_b[k])
        .map(|k| {
            let ca = ord.after(k).iter().filter(|&&c| in_a[c]).count();
            let cb = ord.after(k).iter().filter(|&&c| in_b[c]).count();
            ca * cb
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{clique, largest_eigenvalue, path, star, DEFAULT_MAX_ITER, DEFAULT_TOL};

    fn eig(h: &Graph) -> (SpectralResult, ImportanceOrdering) {
        let s = largest_eigenvalue(h, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let o = eigenvector_ordering(h, &s).unwrap();
        (s, o)
    }

    #[test]
    fn star_center_first() {
        let h = star(5).with_all_self_loops();
        let (_, o) = eig(&h);
        assert_eq!(o.order()[0], 0);
        assert_eq!(o.order(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn triangle_tie_break() {
        let h = clique(3).with_all_self_loops();
        assert_eq!(eig(&h).1.order(), &[0, 1, 2]);
    }

    #[test]
    fn stale_spectrum_rejected() {
        let h = clique(3).with_all_self_loops();
        let (s, _) = eig(&clique(4).with_all_self_loops());
        assert!(matches!(eigenvector_ordering(&h, &s), Err(Error::Dimension { .. })));
    }

    #[test]
    fn degree_ordering_examples() {
        let o = sequential_degree_ordering(&star(5).with_all_self_loops());
        assert_eq!(o.position(0), 0);
        assert_eq!(sequential_degree_ordering(&clique(4)).order(), &[0, 1, 2, 3]);
        // After the first endpoint goes, the center ties with the other one.
        let o = sequential_degree_ordering(&path(3).with_all_self_loops());
        assert_eq!(o.order(), &[0, 1, 2]);
        assert_eq!(o.max_before(), 1);
    }

    #[test]
    fn reversed_star_fails_importance() {
        let h = star(10).with_all_self_loops();
        let (s, o) = eig(&h);
        assert!(verify_importance(&h, &o, s.lambda));
        let rev = o.reversed(&h);
        assert_eq!(rev.before(0).len(), 9);
        assert!(!verify_importance(&h, &rev, s.lambda));
    }

    #[test]
    fn edgeless_any_order_is_important() {
        let h = Graph::empty(5).with_all_self_loops();
        let o = ImportanceOrdering::from_order(&h, vec![4, 2, 0, 1, 3]).unwrap();
        assert!(verify_importance(&h, &o, 1.0));
    }

    #[test]
    fn from_order_rejects_non_permutation() {
        let h = path(3);
        assert!(ImportanceOrdering::from_order(&h, vec![0, 0, 1]).is_err());
        assert!(ImportanceOrdering::from_order(&h, vec![0, 1]).is_err());
        assert!(ImportanceOrdering::from_order(&h, vec![0, 1, 3]).is_err());
    }

    #[test]
    fn boundary_and_common_parents() {
        let g = path(3);
        assert_eq!(boundary_edges(&g, &[0, 1], &[0, 1]), 0);
        let ord = ImportanceOrdering::from_order(&g, vec![1, 0, 2]).unwrap();
        assert_eq!(common_parent_products(&ord, &[0], &[2]), 1);
        assert_eq!(boundary_edges(&g, &[0, 1], &[1, 2]), 2);
    }
}
