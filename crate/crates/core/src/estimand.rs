//! Contrastive estimands, exposure mappings and conflict graphs.
//!
//! An estimand fixes, for every unit `i`, two interventions on the closed
//! neighborhood `Ñ(i)`. Under arbitrary neighborhood interference the
//! exposure of `i` is the set of treated units in `Ñ(i)`, so each
//! intervention is fully described by the treated subset it pins.

use crate::error::{Error, Result};
use crate::graph::{power_graph_two, Graph};
use serde::{Deserialize, Serialize};

/// Index of a contrastive exposure: `E1` is `e1` (k = 1), `E0` is `e0` (k = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Contrast {
    E0,
    E1,
}

impl Contrast {
    pub const BOTH: [Contrast; 2] = [Contrast::E1, Contrast::E0];

    pub fn index(self) -> usize {
        match self {
            Contrast::E0 => 0,
            Contrast::E1 => 1,
        }
    }

    /// `+1` for `e1`, `-1` for `e0`.
    pub fn sign(self) -> f64 {
        match self {
            Contrast::E0 => -1.0,
            Contrast::E1 => 1.0,
        }
    }

    pub fn from_index(k: u8) -> Result<Self> {
        match k {
            0 => Ok(Contrast::E0),
            1 => Ok(Contrast::E1),
            _ => Err(Error::Argument(format!("contrast index must be 0 or 1, got {k}"))),
        }
    }
}

/// Treated units within a closed neighborhood, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Exposure(pub Vec<usize>);

impl Exposure {
    pub fn treated(&self) -> &[usize] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Estimand {
    /// All treated versus all control.
    Gate,
    /// Only unit `i` treated versus no one treated.
    #[serde(rename = "direct")]
    DirectEffect,
    /// Only the seeds `M_i ⊆ N(i)` treated versus no one treated.
    #[serde(rename = "spillover")]
    SpillOver { seeds: Vec<Vec<usize>> },
    /// Arbitrary per-unit pair of interventions given as `(unit, bit)` lists on
    /// `Ñ(i)`; unlisted coordinates of `Ñ(i)` are control.
    Custom { z1: Vec<Vec<(usize, u8)>>, z0: Vec<Vec<(usize, u8)>> },
}

impl Estimand {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimand::Gate => "gate",
            Estimand::DirectEffect => "direct",
            Estimand::SpillOver { .. } => "spillover",
            Estimand::Custom { .. } => "custom",
        }
    }

    /// Validates against `g` and resolves both exposures of every unit.
    pub fn resolve(&self, g: &Graph) -> Result<Contrasts> {
        let n = g.n();
        let mut e1 = Vec::with_capacity(n);
        let mut e0 = Vec::with_capacity(n);
        match self {
            Estimand::Gate => {
                for i in 0..n {
                    e1.push(Exposure(g.closed_neighborhood(i)));
                    e0.push(Exposure::default());
                }
            }
            Estimand::DirectEffect => {
                for i in 0..n {
                    e1.push(Exposure(vec![i]));
                    e0.push(Exposure::default());
                }
            }
            Estimand::SpillOver { seeds } => {
                check_len(seeds.len(), n, "seeds")?;
                for (i, m) in seeds.iter().enumerate() {
                    if m.is_empty() {
                        return Err(Error::Estimand(format!("unit {i} has an empty seed set")));
                    }
                    let mut set = m.clone();
                    set.sort_unstable();
                    set.dedup();
                    if let Some(&bad) = set.iter().find(|&&v| v >= n || !g.is_adjacent(i, v) || v == i) {
                        return Err(Error::Estimand(format!("seed {bad} of unit {i} is not a neighbor of {i}")));
                    }
                    e1.push(Exposure(set));
                    e0.push(Exposure::default());
                }
            }
            Estimand::Custom { z1, z0 } => {
                check_len(z1.len(), n, "z1")?;
                check_len(z0.len(), n, "z0")?;
                for i in 0..n {
                    e1.push(pinned_exposure(g, i, &z1[i])?);
                    e0.push(pinned_exposure(g, i, &z0[i])?);
                }
            }
        }
        for i in 0..n {
            if e1[i] == e0[i] {
                return Err(Error::Estimand(format!("unit {i}: contrasting interventions give the same exposure")));
            }
        }
        Ok(Contrasts { exposures: [e0, e1] })
    }
}

fn check_len(got: usize, expected: usize, what: &str) -> Result<()> {
    if got != expected {
        return Err(Error::Estimand(format!("{what} has {got} entries for {expected} units")));
    }
    Ok(())
}

fn pinned_exposure(g: &Graph, i: usize, pins: &[(usize, u8)]) -> Result<Exposure> {
    let closed = g.closed_neighborhood(i);
    let mut treated = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for &(v, bit) in pins {
        if closed.binary_search(&v).is_err() {
            return Err(Error::Estimand(format!("unit {i}: coordinate {v} lies outside its closed neighborhood")));
        }
        if bit > 1 {
            return Err(Error::Estimand(format!("unit {i}: bit for {v} must be 0 or 1, got {bit}")));
        }
        if !seen.insert(v) {
            return Err(Error::Estimand(format!("unit {i}: coordinate {v} listed twice")));
        }
        if bit == 1 {
            treated.push(v);
        }
    }
    treated.sort_unstable();
    Ok(Exposure(treated))
}

/// Both contrastive exposures of every unit, resolved against a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Contrasts {
    exposures: [Vec<Exposure>; 2],
}

impl Contrasts {
    pub fn n(&self) -> usize {
        self.exposures[0].len()
    }

    pub fn exposure(&self, i: usize, k: Contrast) -> &Exposure {
        &self.exposures[k.index()][i]
    }

    /// Bit that intervention `z_i^(k)` pins on `v ∈ Ñ(i)`.
    pub fn pinned_bit(&self, i: usize, k: Contrast, v: usize) -> bool {
        self.exposure(i, k).contains(v)
    }

    /// Definition-level conflict test: some pair of contrastive interventions
    /// of `i` and `j` disagrees on `Ñ(i) ∩ Ñ(j)`. Every unit conflicts with
    /// itself.
    pub fn conflict(&self, g: &Graph, i: usize, j: usize) -> bool {
        if i == j {
            return true;
        }
        let a = g.closed_neighborhood(i);
        let b = g.closed_neighborhood(j);
        let (mut x, mut y) = (0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    let v = a[x];
                    let bits = [
                        self.pinned_bit(i, Contrast::E0, v),
                        self.pinned_bit(i, Contrast::E1, v),
                        self.pinned_bit(j, Contrast::E0, v),
                        self.pinned_bit(j, Contrast::E1, v),
                    ];
                    if bits.iter().any(|&b| b != bits[0]) {
                        return true;
                    }
                    x += 1;
                    y += 1;
                }
            }
        }
        false
    }
}

/// `d_i(z)`: treated units in `Ñ(i)`.
pub fn exposure_of(g: &Graph, i: usize, z: &[bool]) -> Exposure {
    Exposure(g.closed_neighborhood(i).into_iter().filter(|&j| z[j]).collect())
}

pub fn contrastive_exposures(g: &Graph, est: &Estimand, i: usize) -> Result<(Exposure, Exposure)> {
    g.check_vertex(i)?;
    let c = est.resolve(g)?;
    Ok((c.exposure(i, Contrast::E1).clone(), c.exposure(i, Contrast::E0).clone()))
}

pub fn conflict(g: &Graph, est: &Estimand, i: usize, j: usize) -> Result<bool> {
    g.check_vertex(i)?;
    g.check_vertex(j)?;
    Ok(est.resolve(g)?.conflict(g, i, j))
}

/// Conflict graph with a self-loop on every vertex.
///
/// Direct effect gives `G` itself, GATE gives `G²`, spill-over joins `i` to
/// every unit whose closed neighborhood meets `M_i` (and vice versa); custom
/// estimands test the predicate on all pairs within distance two of `G`.
pub fn build_conflict_graph(g: &Graph, est: &Estimand) -> Result<Graph> {
    let contrasts = est.resolve(g)?;
    Ok(match est {
        Estimand::DirectEffect => g.with_all_self_loops(),
        Estimand::Gate => power_graph_two(g),
        Estimand::SpillOver { .. } => {
            let n = g.n();
            let mut edges = Vec::new();
            for i in 0..n {
                for &v in contrasts.exposure(i, Contrast::E1).treated() {
                    for j in g.closed_neighborhood(v) {
                        if j != i {
                            edges.push((i, j));
                        }
                    }
                }
            }
            Graph::from_edge_list(n, &edges, &vec![true; n])?
        }
        Estimand::Custom { .. } => brute_conflict_graph(g, &contrasts),
    })
}

/// Conflict graph from the pairwise predicate over all pairs within
/// distance two (farther pairs have disjoint closed neighborhoods).
pub fn brute_conflict_graph(g: &Graph, contrasts: &Contrasts) -> Graph {
    let n = g.n();
    let mut adjacency = Vec::with_capacity(n);
    for i in 0..n {
        let mut list: Vec<usize> =
            g.ball(i, 2).into_iter().map(|(j, _)| j).filter(|&j| j != i && contrasts.conflict(g, i, j)).collect();
        list.sort_unstable();
        adjacency.push(list);
    }
    Graph::from_sorted_adjacency(adjacency, vec![true; n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{clique, path, star};

    #[test]
    fn exposure_definition() {
        let t = clique(3);
        assert_eq!(exposure_of(&t, 0, &[true, false, true]).0, vec![0, 2]);
        assert!(exposure_of(&t, 1, &[false; 3]).is_empty());
        assert_eq!(exposure_of(&star(4), 0, &[false, true, true, true]).0, vec![1, 2, 3]);
    }

    #[test]
    fn catalog_exposures() {
        let p = path(3);
        let (e1, e0) = contrastive_exposures(&p, &Estimand::DirectEffect, 1).unwrap();
        assert_eq!((e1.0, e0.0), (vec![1], vec![]));
        let (e1, e0) = contrastive_exposures(&clique(3), &Estimand::Gate, 0).unwrap();
        assert_eq!((e1.0, e0.0), (vec![0, 1, 2], vec![]));
        let spill = Estimand::SpillOver { seeds: vec![vec![1], vec![0], vec![1]] };
        let (e1, e0) = contrastive_exposures(&p, &spill, 1).unwrap();
        assert_eq!((e1.0, e0.0), (vec![0], vec![]));
    }

    #[test]
    fn spillover_validation() {
        let p = path(3);
        let empty = Estimand::SpillOver { seeds: vec![vec![1], vec![], vec![1]] };
        assert!(empty.resolve(&p).is_err());
        let not_neighbor = Estimand::SpillOver { seeds: vec![vec![2], vec![0], vec![1]] };
        assert!(not_neighbor.resolve(&p).is_err());
        let self_seed = Estimand::SpillOver { seeds: vec![vec![0], vec![0], vec![1]] };
        assert!(self_seed.resolve(&p).is_err());
    }

    #[test]
    fn custom_validation() {
        let p = path(3);
        let outside =
            Estimand::Custom { z1: vec![vec![(2, 1)], vec![(1, 1)], vec![(2, 1)]], z0: vec![vec![], vec![], vec![]] };
        assert!(outside.resolve(&p).is_err());
        let same =
            Estimand::Custom { z1: vec![vec![(0, 0)], vec![(1, 1)], vec![(2, 1)]], z0: vec![vec![], vec![], vec![]] };
        assert!(same.resolve(&p).is_err());
    }

    #[test]
    fn conflict_examples() {
        let edge = path(2);
        assert!(conflict(&edge, &Estimand::DirectEffect, 0, 1).unwrap());
        let p = path(3);
        assert!(!conflict(&p, &Estimand::DirectEffect, 0, 2).unwrap());
        assert!(conflict(&p, &Estimand::Gate, 0, 2).unwrap());
        assert!(conflict(&p, &Estimand::Gate, 1, 1).unwrap());
    }

    #[test]
    fn conflict_graph_examples() {
        let t = clique(3);
        assert_eq!(build_conflict_graph(&t, &Estimand::DirectEffect).unwrap(), t.with_all_self_loops());
        let p = path(3);
        assert_eq!(build_conflict_graph(&p, &Estimand::Gate).unwrap(), t.with_all_self_loops());
        let pairs = Estimand::SpillOver { seeds: vec![vec![1], vec![0]] };
        let h = build_conflict_graph(&path(2), &pairs).unwrap();
        assert_eq!(h, path(2).with_all_self_loops());
    }

    #[test]
    fn spillover_seed_reaching_neighbor_conflicts() {
        // 0 - 1 - 2 - 3 with M_0 = {1}, M_2 = {3}: z_0^(1) treats 1, which lies
        // in Ñ(2), where z_2^(0) requires control.
        let g = path(4);
        let est = Estimand::SpillOver { seeds: vec![vec![1], vec![0], vec![3], vec![2]] };
        let c = est.resolve(&g).unwrap();
        assert!(c.conflict(&g, 0, 2));
        let h = build_conflict_graph(&g, &est).unwrap();
        assert!(h.is_adjacent(0, 2));
        assert_eq!(h, brute_conflict_graph(&g, &c));
    }

    #[test]
    fn json_round_trip() {
        let est = Estimand::SpillOver { seeds: vec![vec![1], vec![0]] };
        let text = serde_json::to_string(&est).unwrap();
        assert_eq!(text, r#"{"kind":"spillover","seeds":[[1],[0]]}"#);
        assert_eq!(Estimand::from_json(&text).unwrap(), est);
        assert_eq!(Estimand::from_json(r#"{"kind":"direct"}"#).unwrap(), Estimand::DirectEffect);
        let custom = Estimand::from_json(r#"{"kind":"custom","z1":[[[0,1]],[[1,1]]],"z0":[[],[]]}"#).unwrap();
        assert!(matches!(custom, Estimand::Custom { .. }));
    }
}
