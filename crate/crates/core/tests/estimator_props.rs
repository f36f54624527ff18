mod common;

use cgd_core::design::{ConflictGraphDesign, OrderingKind};
use cgd_core::estimand::Estimand;
use cgd_core::estimator::{
    build_v_matrix, chebyshev_half_width, exact_variance_modified, lambda_v, lambda_v_cached, modified_ht, normal_cdf,
    normal_quantile, variance_bound, wald_half_width, OutcomeTable, V_MAX_ITER, V_TOL,
};
use cgd_core::oracle::enumerate_design;
use cgd_core::sim::{simulate, DesignKind, GraphSpec, OutcomeModel, SimConfig};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Standard normal CDF from the Maclaurin series of erf; fine for |x| <= 3.
fn erf_series_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let (mut term, mut sum) = (z, z);
    for k in 1..200 {
        term *= -z * z / k as f64;
        sum += term / (2 * k + 1) as f64;
    }
    0.5 * (1.0 + 2.0 / std::f64::consts::PI.sqrt() * sum)
}

fn bisect_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-3.5, 3.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erf_series_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn medium_design(seed: u64) -> ConflictGraphDesign {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(10..=60);
    let g = common::connected_graph(n, rng.random_range(0.0..0.1), &mut rng);
    let est = common::estimand_for(seed as usize, &g, &mut rng);
    ConflictGraphDesign::new(g, &est, rng.random_range(1.5..3.0), OrderingKind::Eigenvector).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quantile_matches_bisection_oracle(p in 0.002f64..0.998) {
        prop_assert!((normal_quantile(p) - bisect_quantile(p)).abs() <= 1e-9);
        let x = bisect_quantile(p);
        prop_assert!((normal_cdf(x) - p).abs() <= 1e-12);
    }

    #[test]
    fn chebyshev_at_least_wald(alpha in 1e-6f64..=0.31, vb_hat in 0.0f64..100.0) {
        let c = chebyshev_half_width(vb_hat, alpha).unwrap();
        let w = wald_half_width(vb_hat, alpha).unwrap();
        prop_assert!(c >= w);
        let c4 = chebyshev_half_width(4.0 * vb_hat, alpha).unwrap();
        let w4 = wald_half_width(4.0 * vb_hat, alpha).unwrap();
        prop_assert!((c4 - 2.0 * c).abs() <= 1e-12 * c4.max(1.0));
        prop_assert!((w4 - 2.0 * w).abs() <= 1e-12 * w4.max(1.0));
    }

    #[test]
    fn lambda_v_matches_dense_eigensolver(seed in any::<u64>()) {
        let d = medium_design(seed);
        let v = build_v_matrix(&d.h, &d.ord, &d.params);
        let dense = v.to_dense();
        let m = DMatrix::from_fn(v.dim(), v.dim(), |a, b| dense[a][b]);
        prop_assert!((m.clone() - m.transpose()).amax() == 0.0);
        let top = SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let got = lambda_v(&v, V_TOL, V_MAX_ITER).unwrap().value;
        prop_assert!((got - top).abs() <= 1e-6 * top, "{got} vs {top}");
        prop_assert_eq!(lambda_v_cached(&d.h, &d.ord, &d.params).unwrap(), got);
    }

    #[test]
    fn vb_is_sharp_on_leading_eigenvector(seed in any::<u64>()) {
        let d = medium_design(seed);
        let n = d.n();
        let pair = lambda_v(&build_v_matrix(&d.h, &d.ord, &d.params), V_TOL, V_MAX_ITER).unwrap();
        let o = OutcomeTable::new(pair.vector[..n].to_vec(), pair.vector[n..].to_vec()).unwrap();
        let var = exact_variance_modified(&o, &d.h, &d.ord, &d.params);
        let vb = variance_bound(&o, pair.value);
        prop_assert!(vb / var <= 1.0 + 1e-6 && vb / var >= 1.0 - 1e-6, "VB/Var = {}", vb / var);
    }

    #[test]
    fn variance_formula_matches_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::small_instance(seed as usize, 8, 2.0, &mut rng);
        let d = &inst.design;
        let dist = enumerate_design(d).unwrap();
        let var = dist.variance(|a| modified_ht(&inst.outcomes, &a.draw(), &d.ord, &d.params));
        let closed = exact_variance_modified(&inst.outcomes, &d.h, &d.ord, &d.params);
        prop_assert!((var - closed).abs() <= 1e-10 * closed.max(1.0));
        prop_assert!((closed - d_quadratic(d, &inst.outcomes)).abs() <= 1e-10 * closed.max(1.0));
    }
}

fn d_quadratic(d: &ConflictGraphDesign, o: &OutcomeTable) -> f64 {
    let n = d.n() as f64;
    build_v_matrix(&d.h, &d.ord, &d.params).quadratic_form(o) / (n * n)
}

#[test]
fn wald_quantile_reference() {
    let z = bisect_quantile(0.975);
    assert!((normal_quantile(0.975) - z).abs() < 1e-9);
    assert!((wald_half_width(1.0, 0.05).unwrap() - z).abs() < 1e-9);
    assert!((chebyshev_half_width(1.0, 0.05).unwrap() - 20f64.sqrt()).abs() < 1e-12);
}

#[test]
fn monte_carlo_variance_matches_closed_form() {
    const REPS: usize = 20_000;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let n = rng.random_range(10..=60);
        let g = common::connected_graph(n, 0.05, &mut rng);
        let d = ConflictGraphDesign::new(g, &Estimand::DirectEffect, 2.0, OrderingKind::Eigenvector).unwrap();
        let o = common::uniform_outcomes(n, &mut rng);
        let exact = exact_variance_modified(&o, &d.h, &d.ord, &d.params);
        let xs: Vec<f64> = (0..REPS).map(|_| modified_ht(&o, &d.sample(&mut rng), &d.ord, &d.params)).collect();
        let mean = xs.iter().sum::<f64>() / REPS as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (REPS - 1) as f64;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / REPS as f64;
        let se = ((m4 - var * var) / REPS as f64).sqrt();
        assert!((var - exact).abs() <= 5.0 * se, "seed {seed}: {var} vs {exact} (se {se})");

        let mut cfg = SimConfig::new(GraphSpec::Path { n: 1 }, Estimand::DirectEffect, OutcomeModel::Medium);
        cfg.designs = vec![DesignKind::Cgd];
        cfg.replicates = REPS;
        cfg.mc_prob_draws = 1;
        cfg.seed = seed;
        let row = simulate(&d.g, &o, &cfg).unwrap().rows.remove(0);
        assert_eq!(row.exact_var, Some(exact));
        let emp = row.emp_var.unwrap();
        assert!((emp - exact).abs() <= 5.0 * se, "simulated seed {seed}: {emp} vs {exact} (se {se})");
    }
}
