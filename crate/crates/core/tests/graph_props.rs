mod common;

use cgd_core::estimand::{brute_conflict_graph, build_conflict_graph, Estimand};
use cgd_core::graph::{
    clique_of_cliques, erdos_renyi, hub_cliques, largest_eigenvalue, power_graph_two, preferential_attachment, star,
    walk_count, Graph, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense(g: &Graph, loops: bool) -> DMatrix<f64> {
    DMatrix::from_fn(g.n(), g.n(), |i, j| {
        if i == j {
            if loops && g.has_self_loop(i) {
                1.0
            } else {
                0.0
            }
        } else if g.is_adjacent(i, j) {
            1.0
        } else {
            0.0
        }
    })
}

fn dense_lambda(g: &Graph) -> f64 {
    SymmetricEigen::new(dense(g, true)).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn random_graph(seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=60);
    match seed % 4 {
        0 => erdos_renyi(n, rng.random_range(0.02..0.4), &mut rng),
        1 => preferential_attachment(n.max(3), rng.random_range(1..=2), rng.random_range(0.5..1.5), &mut rng).unwrap(),
        2 => common::connected_graph(n, rng.random_range(0.0..0.2), &mut rng),
        _ => star(n),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_sandwich(seed in any::<u64>()) {
        let h = random_graph(seed).with_all_self_loops();
        let s = largest_eigenvalue(&h, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        prop_assert!(h.avg_loop_degree() <= s.lambda + 1e-9);
        prop_assert!(s.lambda <= h.max_loop_degree() as f64 + 1e-9);
        prop_assert!((s.lambda - dense_lambda(&h)).abs() <= 1e-7 * s.lambda.max(1.0));
    }

    #[test]
    fn self_loop_shift(seed in any::<u64>()) {
        let g = random_graph(seed);
        let with = largest_eigenvalue(&g.with_all_self_loops(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap().lambda;
        let without = largest_eigenvalue(&g.without_self_loops(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap().lambda;
        prop_assert!((with - without - 1.0).abs() <= 1e-8, "{with} vs {without}");
    }

    #[test]
    fn perron_vector_is_unit_and_nonnegative(seed in any::<u64>()) {
        let h = random_graph(seed).with_all_self_loops();
        let s = largest_eigenvalue(&h, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        prop_assert!(s.vector.iter().all(|&v| v >= 0.0));
        for comp in h.components() {
            let norm: f64 = comp.iter().map(|&v| s.vector[v] * s.vector[v]).sum();
            prop_assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn walk_count_matches_matrix_powers(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=15);
        let g = erdos_renyi(n, rng.random_range(0.1..0.7), &mut rng);
        let a = dense(&g, false);
        let mut p = a.clone();
        for s in 1..=4 {
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(walk_count(&g, i, j, s).unwrap(), p[(i, j)] as u64);
                }
            }
            p = &p * &a;
        }
    }

    #[test]
    fn conflict_graph_closed_form_matches_definition(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=12);
        let g = common::connected_graph(n, rng.random_range(0.0..0.4), &mut rng);
        for est in [Estimand::Gate, Estimand::DirectEffect, common::random_seeds(&g, &mut rng)] {
            let h = build_conflict_graph(&g, &est).unwrap();
            let brute = brute_conflict_graph(&g, &est.resolve(&g).unwrap());
            prop_assert_eq!(&h, &brute, "{}", est.name());
            let g2 = power_graph_two(&g);
            for i in 0..n {
                prop_assert!(h.has_self_loop(i));
            }
            for (i, j) in h.edges() {
                prop_assert!(i == j || g2.is_adjacent(i, j));
            }
        }
    }

    #[test]
    fn neighborhood_intersection_walk_counts(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=20);
        let g = erdos_renyi(n, rng.random_range(0.05..0.6), &mut rng);
        for i in 0..n {
            let a = g.closed_neighborhood(i);
            for j in (0..n).filter(|&j| j != i) {
                let b = g.closed_neighborhood(j);
                let inter = a.iter().filter(|v| b.contains(v)).count() as u64;
                let expect = 2 * walk_count(&g, i, j, 1).unwrap() + walk_count(&g, i, j, 2).unwrap();
                prop_assert_eq!(inter, expect);
            }
        }
    }
}

#[test]
fn gate_conflict_graph_is_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = erdos_renyi(25, 0.1, &mut rng);
    let h = build_conflict_graph(&g, &Estimand::Gate).unwrap();
    assert_eq!(h, power_graph_two(&g).with_all_self_loops());
    let d = build_conflict_graph(&g, &Estimand::DirectEffect).unwrap();
    assert_eq!(d, g.with_all_self_loops());
}

#[test]
fn generator_sandwich() {
    for g in [hub_cliques(256).unwrap(), clique_of_cliques(30).unwrap(), star(40)] {
        let h = g.with_all_self_loops();
        let s = largest_eigenvalue(&h, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(h.avg_loop_degree() <= s.lambda + 1e-9 && s.lambda <= h.max_loop_degree() as f64 + 1e-9);
    }
}
