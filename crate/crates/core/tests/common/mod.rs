#![allow(dead_code)]

use cgd_core::design::{ConflictGraphDesign, OrderingKind};
use cgd_core::estimand::Estimand;
use cgd_core::estimator::OutcomeTable;
use cgd_core::graph::Graph;
use rand::seq::IndexedRandom;
use rand::Rng;

/// Random spanning tree plus independent extra edges; always connected.
pub fn connected_graph<R: Rng>(n: usize, extra_p: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < extra_p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

/// Random nonempty seed subsets of each unit's neighbors.
pub fn random_seeds<R: Rng>(g: &Graph, rng: &mut R) -> Estimand {
    let seeds = (0..g.n())
        .map(|i| {
            let nbrs = g.neighbors(i);
            let mut m: Vec<usize> = nbrs.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
            if m.is_empty() {
                m.push(*nbrs.choose(rng).expect("connected graph"));
            }
            m
        })
        .collect();
    Estimand::SpillOver { seeds }
}

/// Cycles through direct, GATE and spill-over estimands.
pub fn estimand_for<R: Rng>(idx: usize, g: &Graph, rng: &mut R) -> Estimand {
    match idx % 3 {
        0 => Estimand::DirectEffect,
        1 => Estimand::Gate,
        _ => random_seeds(g, rng),
    }
}

pub fn uniform_outcomes<R: Rng>(n: usize, rng: &mut R) -> OutcomeTable {
    OutcomeTable::new(
        (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
        (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
    )
    .unwrap()
}

pub struct Instance {
    pub design: ConflictGraphDesign,
    pub outcomes: OutcomeTable,
}

/// Connected graph on 3..=max_n units with a cycled estimand and outcomes in [-5, 5].
pub fn small_instance<R: Rng>(idx: usize, max_n: usize, r: f64, rng: &mut R) -> Instance {
    let n = rng.random_range(3..=max_n);
    let g = connected_graph(n, rng.random_range(0.0..0.5), rng);
    let est = estimand_for(idx, &g, rng);
    let design = ConflictGraphDesign::new(g, &est, r, OrderingKind::Eigenvector).unwrap();
    let outcomes = uniform_outcomes(n, rng);
    Instance { design, outcomes }
}
