//! Graph generators: preferential attachment, simple families, and the two
//! counterexample topologies (hub with star blocks, clique of cliques).

use super::Graph;
use crate::error::{Error, Result};
use rand::Rng;

/// Star on `n` vertices with center `0`.
pub fn star(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
    Graph::from_edges(n, &edges).expect("valid star")
}

/// Path `0 - 1 - ... - (n-1)`.
pub fn path(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    Graph::from_edges(n, &edges).expect("valid path")
}

/// Complete graph on `n` vertices.
pub fn clique(n: usize) -> Graph {
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j));
        }
    }
    Graph::from_edges(n, &edges).expect("valid clique")
}

/// Erdős–Rényi `G(n, p)`.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("valid G(n,p)")
}

/// Preferential attachment: `m` isolated seed vertices, then each arriving
/// vertex attaches to `m` distinct earlier vertices drawn sequentially
/// without replacement with weight `deg^r_exp`.
///
/// Zero-degree vertices get the smallest positive weight present at that
/// step; when every weight is zero the draw is uniform.
pub fn preferential_attachment<R: Rng + ?Sized>(n: usize, m: usize, r_exp: f64, rng: &mut R) -> Result<Graph> {
    if m == 0 || n <= m {
        return Err(Error::Generator(format!("preferential attachment needs n > m >= 1 (n={n}, m={m})")));
    }
    if !r_exp.is_finite() || r_exp < 0.0 {
        return Err(Error::Generator(format!("exponent must be finite and nonnegative, got {r_exp}")));
    }
    let mut degree = vec![0usize; n];
    let mut edges = Vec::with_capacity((n - m) * m);
    let mut weights = Vec::with_capacity(n);
    for t in m..n {
        weights.clear();
        weights.extend(degree[..t].iter().map(|&d| if d == 0 { 0.0 } else { (d as f64).powf(r_exp) }));
        let min_pos = weights.iter().copied().filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
        let fill = if min_pos.is_finite() { min_pos } else { 1.0 };
        for w in weights.iter_mut() {
            if *w == 0.0 {
                *w = fill;
            }
        }
        let mut total: f64 = weights.iter().sum();
        for _ in 0..m {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (v, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                pick = Some(v);
                if target < w {
                    break;
                }
                target -= w;
            }
            // Rounding can run off the end; `pick` then holds the last live vertex.
            let v = pick.expect("at least m live candidates");
            total -= weights[v];
            weights[v] = 0.0;
            edges.push((v, t));
        }
        for &(v, _) in &edges[edges.len() - m..] {
            degree[v] += 1;
        }
        degree[t] = m;
    }
    Graph::from_edges(n, &edges)
}

fn ceil_sqrt(n: usize) -> usize {
    let mut k = (n as f64).sqrt().ceil() as usize;
    while k > 0 && (k - 1) * (k - 1) >= n {
        k -= 1;
    }
    while k * k < n {
        k += 1;
    }
    k
}

/// Vertex roles of [`hub_cliques`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HubCliquesLayout {
    /// Number of block vertices requested.
    pub n: usize,
    /// Vertex adjacent to every block vertex.
    pub hub: usize,
    /// Secondary hubs, one per block.
    pub secondary: Vec<usize>,
    /// Block vertices owned by each secondary hub.
    pub blocks: Vec<Vec<usize>>,
    /// Nominal block size `⌈√n · log2 n⌉`.
    pub block_size: usize,
}

impl HubCliquesLayout {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Generator(format!("hub_cliques needs n >= 2, got {n}")));
        }
        let log = (n as f64).log2().ceil().max(1.0);
        let block_size = ((ceil_sqrt(n) as f64) * log).ceil() as usize;
        let block_size = block_size.min(n);
        let count = n.div_ceil(block_size);
        let secondary: Vec<usize> = (1..=count).collect();
        let first = count + 1;
        let blocks = (0..count)
            .map(|b| {
                let lo = first + b * block_size;
                let hi = (first + (b + 1) * block_size).min(first + n);
                (lo..hi).collect()
            })
            .collect();
        Ok(Self { n, hub: 0, secondary, blocks, block_size })
    }

    pub fn total_vertices(&self) -> usize {
        1 + self.secondary.len() + self.n
    }
}

/// Hub-and-blocks graph: vertex `0` is joined to all `n` block vertices;
/// `⌈n / ⌈√n·log2 n⌉⌉` secondary hubs (vertices `1..`) are each joined to a
/// disjoint block of `⌈√n·log2 n⌉` block vertices (the last block may be
/// short). Total vertex count is `n + #secondary + 1`.
pub fn hub_cliques(n: usize) -> Result<Graph> {
    let layout = HubCliquesLayout::new(n)?;
    let mut edges = Vec::new();
    for (b, block) in layout.blocks.iter().enumerate() {
        for &v in block {
            edges.push((layout.hub, v));
            edges.push((layout.secondary[b], v));
        }
    }
    Graph::from_edges(layout.total_vertices(), &edges)
}

/// `k = ⌈√n⌉` disjoint cliques of size `k` whose first vertices are pairwise
/// adjacent. Clique `c` occupies `c*k .. (c+1)*k`; its representative is `c*k`.
pub fn clique_of_cliques(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Generator("clique_of_cliques needs n >= 1".into()));
    }
    let k = ceil_sqrt(n);
    let mut edges = Vec::new();
    for c in 0..k {
        let base = c * k;
        for a in 0..k {
            for b in a + 1..k {
                edges.push((base + a, base + b));
            }
        }
        for d in c + 1..k {
            edges.push((base, d * k));
        }
    }
    Graph::from_edges(k * k, &edges)
}
