//! Exact distribution of the conflict graph design by enumerating every
//! desired-exposure vector, plus the invariant battery built on it.

use crate::design::{
    fired_contrast, realize, realize_in_order, ConflictGraphDesign, DesignDraw, DesignParams, Desired, OrderingKind,
};
use crate::error::{Error, Result};
use crate::estimand::{exposure_of, Contrast, Contrasts, Estimand};
use crate::estimator::{
    build_v_matrix, exact_variance_modified, lambda_v, modified_ht, realized_contrast, standard_ht, true_effect,
    variance_bound, vb_estimator, ExposureProbs, OutcomeTable, V_MAX_ITER, V_TOL,
};
use crate::graph::{clique, erdos_renyi, path, star, Graph};
use crate::ordering::ImportanceOrdering;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MAX_ORACLE_UNITS: usize = 12;
const LOG_SPACE_ABOVE: usize = 9;

/// One desired-exposure vector with its probability and realized intervention.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub u: Vec<Desired>,
    pub prob: f64,
    pub z: Vec<bool>,
}

impl Atom {
    pub fn draw(&self) -> DesignDraw {
        DesignDraw { u: self.u.clone(), z: self.z.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleDistribution {
    pub n: usize,
    pub atoms: Vec<Atom>,
}

/// Every positive-probability `u ∈ {e1, e0, *}^n` in lexicographic order
/// (`e1 < e0 < *`, first coordinate most significant).
pub fn enumerate(
    g: &Graph,
    contrasts: &Contrasts,
    ord: &ImportanceOrdering,
    params: &DesignParams,
) -> Result<OracleDistribution> {
    let n = g.n();
    if n > MAX_ORACLE_UNITS {
        return Err(Error::OracleTooLarge { n, max: MAX_ORACLE_UNITS });
    }
    let a = params.desire_prob();
    let q = params.star_prob();
    let symbols: &[Desired] = if q > 0.0 { &Desired::ALL } else { &Desired::ALL[..2] };
    let factor = |d: Desired| if d == Desired::Star { q } else { a };
    let base = symbols.len();
    let total = base.pow(n as u32);
    let mut atoms = Vec::with_capacity(total);
    let mut digits = vec![0usize; n];
    for _ in 0..total {
        let u: Vec<Desired> = digits.iter().map(|&d| symbols[d]).collect();
        let prob = if n > LOG_SPACE_ABOVE {
            u.iter().map(|&d| factor(d).ln()).sum::<f64>().exp()
        } else {
            u.iter().map(|&d| factor(d)).product()
        };
        let z = realize(g, contrasts, ord, &u);
        atoms.push(Atom { u, prob, z });
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < base {
                break;
            }
            *d = 0;
        }
    }
    Ok(OracleDistribution { n, atoms })
}

pub fn enumerate_design(d: &ConflictGraphDesign) -> Result<OracleDistribution> {
    enumerate(&d.g, &d.contrasts, &d.ord, &d.params)
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

impl OracleDistribution {
    pub fn total_probability(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.prob))
    }

    pub fn expectation(&self, f: impl Fn(&Atom) -> f64) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.prob * f(a)))
    }

    pub fn covariance(&self, f: impl Fn(&Atom) -> f64, g: impl Fn(&Atom) -> f64) -> f64 {
        let mf = self.expectation(&f);
        let mg = self.expectation(&g);
        compensated_sum(self.atoms.iter().map(|a| a.prob * (f(a) - mf) * (g(a) - mg)))
    }

    pub fn variance(&self, f: impl Fn(&Atom) -> f64) -> f64 {
        self.covariance(&f, &f)
    }

    pub fn probability(&self, event: impl Fn(&Atom) -> bool) -> f64 {
        self.expectation(|a| if event(a) { 1.0 } else { 0.0 })
    }
}

/// Exact `Pr[d_i(Z) = e_k]` for every unit and contrast.
pub fn exact_exposure_probs(dist: &OracleDistribution, g: &Graph, contrasts: &Contrasts) -> ExposureProbs {
    let n = dist.n;
    let mut p1 = vec![0.0; n];
    let mut p0 = vec![0.0; n];
    for (i, (p1i, p0i)) in p1.iter_mut().zip(p0.iter_mut()).enumerate() {
        *p1i = dist.probability(|a| &exposure_of(g, i, &a.z) == contrasts.exposure(i, Contrast::E1));
        *p0i = dist.probability(|a| &exposure_of(g, i, &a.z) == contrasts.exposure(i, Contrast::E0));
    }
    ExposureProbs { p1, p0 }
}

/// Worst deviation of one invariant across the battery's fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub fixtures: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

struct Tally {
    checks: Vec<CheckResult>,
}

impl Tally {
    fn record(&mut self, name: &str, deviation: f64, tolerance: f64) {
        let dev = if deviation.is_nan() { f64::INFINITY } else { deviation };
        match self.checks.iter_mut().find(|c| c.name == name) {
            Some(c) => {
                c.max_deviation = c.max_deviation.max(dev);
                c.fixtures += 1;
                c.passed = c.max_deviation <= c.tolerance;
            }
            None => self.checks.push(CheckResult {
                name: name.to_string(),
                max_deviation: dev,
                tolerance,
                fixtures: 1,
                passed: dev <= tolerance,
            }),
        }
    }
}

/// Relative deviation with an absolute floor of one.
fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Small built-in instances exercised by [`run_battery`].
pub fn battery_fixtures() -> Vec<(String, Graph, Estimand, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let er = erdos_renyi(7, 0.4, &mut rng);
    let star_seeds = Estimand::SpillOver { seeds: vec![vec![1], vec![0], vec![0], vec![0], vec![0]] };
    let custom = Estimand::Custom {
        z1: (0..4).map(|i| vec![(i, 1)]).collect(),
        z0: (0..4usize)
            .map(|i| {
                let mut pins: Vec<(usize, u8)> = vec![(i, 0)];
                if i > 0 {
                    pins.push((i - 1, 1));
                }
                if i < 3 {
                    pins.push((i + 1, 1));
                }
                pins
            })
            .collect(),
    };
    vec![
        ("triangle/direct".into(), clique(3), Estimand::DirectEffect, 2.0),
        ("triangle/gate".into(), clique(3), Estimand::Gate, 2.0),
        ("path3/direct".into(), path(3), Estimand::DirectEffect, 2.0),
        ("path5/gate".into(), path(5), Estimand::Gate, 2.0),
        ("star5/direct".into(), star(5), Estimand::DirectEffect, 2.0),
        ("star5/spillover".into(), star(5), star_seeds, 2.0),
        ("path4/custom".into(), path(4), custom, 2.0),
        ("er7/direct".into(), er.clone(), Estimand::DirectEffect, 2.0),
        ("er7/gate".into(), er, Estimand::Gate, 2.19),
        ("edgeless4/direct".into(), Graph::empty(4), Estimand::DirectEffect, 1.0),
    ]
}

/// Checks every exact identity of the design against enumeration.
pub fn run_battery() -> Result<BatteryReport> {
    let mut tally = Tally { checks: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (_, g, est, r) in battery_fixtures() {
        let d = ConflictGraphDesign::new(g, &est, r, OrderingKind::Eigenvector)?;
        let n = d.n();
        let outcomes = OutcomeTable::new(
            (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
            (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
        )?;
        check_fixture(&d, &outcomes, &mut tally)?;
    }
    let passed = tally.checks.iter().all(|c| c.passed);
    Ok(BatteryReport { passed, checks: tally.checks })
}

fn check_fixture(d: &ConflictGraphDesign, outcomes: &OutcomeTable, tally: &mut Tally) -> Result<()> {
    let dist = enumerate_design(d)?;
    let n = d.n();
    let (ord, params) = (&d.ord, &d.params);
    tally.record("total_probability", (dist.total_probability() - 1.0).abs(), 1e-12);

    let mut marg = 0.0f64;
    for i in 0..n {
        for s in Desired::ALL {
            let expect = if s == Desired::Star { params.star_prob() } else { params.desire_prob() };
            marg = marg.max((dist.probability(|a| a.u[i] == s) - expect).abs());
        }
    }
    tally.record("desired_marginals", marg, 1e-12);

    let tau = true_effect(outcomes);
    let mean = dist.expectation(|a| modified_ht(outcomes, &a.draw(), ord, params));
    tally.record("modified_ht_unbiased", rel(mean, tau), 1e-12);

    let mut single = 0.0f64;
    let mut pair = 0.0f64;
    let mut cov = 0.0f64;
    let fired = |a: &Atom, i: usize, k: Contrast| fired_contrast(i, &a.u, ord) == Some(k);
    for i in 0..n {
        for k in Contrast::BOTH {
            single = single.max((dist.probability(|a| fired(a, i, k)) - d.prob_single(i)).abs());
            let wi = |a: &Atom| if fired(a, i, k) { 1.0 / d.prob_single(i) } else { 0.0 };
            for j in 0..n {
                for l in Contrast::BOTH {
                    let p = dist.probability(|a| fired(a, i, k) && fired(a, j, l));
                    pair = pair.max((p - d.prob_pair(i, k, j, l)).abs());
                    let wj = |a: &Atom| if fired(a, j, l) { 1.0 / d.prob_single(j) } else { 0.0 };
                    cov = cov.max(rel(dist.covariance(wi, wj), d.covariance_entry(i, k, j, l)));
                }
            }
        }
    }
    tally.record("prob_single", single, 1e-12);
    tally.record("prob_pair", pair, 1e-12);
    tally.record("covariance_entry", cov, 1e-10);

    let var = dist.variance(|a| modified_ht(outcomes, &a.draw(), ord, params));
    let var_closed = exact_variance_modified(outcomes, &d.h, ord, params);
    tally.record("exact_variance", rel(var, var_closed), 1e-10);

    let lam_v = lambda_v(&build_v_matrix(&d.h, ord, params), V_TOL, V_MAX_ITER)?.value;
    let vb = variance_bound(outcomes, lam_v);
    let vb_hat_mean = dist.expectation(|a| vb_estimator(outcomes, &a.draw(), ord, params, lam_v));
    tally.record("vb_hat_unbiased", rel(vb_hat_mean, vb), 1e-12);
    tally.record("variance_below_bound", ((var - vb) / vb.max(f64::MIN_POSITIVE)).max(0.0), 1e-9);

    let mut unrealized = 0usize;
    let mut loop_order = 0usize;
    for a in &dist.atoms {
        for i in 0..n {
            if let Some(k) = fired_contrast(i, &a.u, ord) {
                if &exposure_of(&d.g, i, &a.z) != d.contrasts.exposure(i, k) {
                    unrealized += 1;
                }
            }
        }
        if realize_in_order(&d.g, &d.contrasts, ord, &a.u, ord.order()) != a.z {
            loop_order += 1;
        }
    }
    tally.record("desired_event_realized", unrealized as f64, 0.0);
    tally.record("loop_order_independent", loop_order as f64, 0.0);

    let probs = exact_exposure_probs(&dist, &d.g, &d.contrasts);
    let mut positivity = 0usize;
    let std_mean = dist.expectation(|a| standard_ht(outcomes, &d.g, &d.contrasts, &a.z, &probs).unwrap_or(f64::NAN));
    for a in dist.atoms.iter().filter(|a| a.prob > 0.0) {
        for i in 0..n {
            if let Some(k) = realized_contrast(&d.g, &d.contrasts, i, &a.z) {
                if probs.get(i, k) <= 0.0 {
                    positivity += 1;
                }
            }
        }
    }
    tally.record("standard_ht_unbiased", rel(std_mean, tau), 1e-10);
    tally.record("standard_positivity", positivity as f64, 0.0);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_unit_r1() {
        let d =
            ConflictGraphDesign::new(Graph::empty(1), &Estimand::DirectEffect, 1.0, OrderingKind::Eigenvector).unwrap();
        let dist = enumerate_design(&d).unwrap();
        assert_eq!(dist.atoms.len(), 2);
        assert_eq!(dist.atoms[0].u, vec![Desired::E1]);
        assert_eq!(dist.atoms[0].prob, 0.5);
        assert_eq!(dist.atoms[0].z, vec![true]);
        assert_eq!(dist.atoms[1].u, vec![Desired::E0]);
        assert_eq!(dist.atoms[1].z, vec![false]);
    }

    #[test]
    fn triangle_atoms() {
        let d = ConflictGraphDesign::new(clique(3), &Estimand::DirectEffect, 2.0, OrderingKind::Eigenvector).unwrap();
        let dist = enumerate_design(&d).unwrap();
        assert_eq!(dist.atoms.len(), 27);
        assert!((dist.total_probability() - 1.0).abs() < 1e-15);
        let p = dist.probability(|a| fired_contrast(0, &a.u, &d.ord) == Some(Contrast::E1));
        assert!((p - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(dist.expectation(|_| 3.5), 3.5);
        use Desired::*;
        assert_eq!(dist.atoms[1].u, vec![E1, E1, E0]);
        assert_eq!(dist.atoms[26].u, vec![Star, Star, Star]);
    }

    #[test]
    fn too_large() {
        let d = ConflictGraphDesign::new(path(13), &Estimand::DirectEffect, 2.0, OrderingKind::Eigenvector).unwrap();
        assert!(matches!(enumerate_design(&d), Err(Error::OracleTooLarge { .. })));
    }

    #[test]
    fn log_space_matches_direct_products() {
        let d = ConflictGraphDesign::new(path(10), &Estimand::DirectEffect, 2.0, OrderingKind::Eigenvector).unwrap();
        let dist = enumerate_design(&d).unwrap();
        assert!((dist.total_probability() - 1.0).abs() < 1e-12);
        let (a, q) = (d.params.desire_prob(), d.params.star_prob());
        for atom in dist.atoms.iter().step_by(997) {
            let direct: f64 = atom.u.iter().map(|&s| if s == Desired::Star { q } else { a }).product();
            assert!((atom.prob - direct).abs() <= 1e-13 * direct);
        }
    }

    #[test]
    fn exposure_probs_direct_and_path() {
        let d = ConflictGraphDesign::new(path(3), &Estimand::DirectEffect, 2.0, OrderingKind::Eigenvector).unwrap();
        let dist = enumerate_design(&d).unwrap();
        let p = exact_exposure_probs(&dist, &d.g, &d.contrasts);
        for i in 0..3 {
            assert!((p.p1[i] - d.prob_single(i)).abs() < 1e-14);
            assert!(p.p0[i] > d.prob_single(i) + 1e-3);
        }
        let d =
            ConflictGraphDesign::new(Graph::empty(3), &Estimand::DirectEffect, 1.0, OrderingKind::Eigenvector).unwrap();
        let dist = enumerate_design(&d).unwrap();
        let p = exact_exposure_probs(&dist, &d.g, &d.contrasts);
        assert!(p.p1.iter().chain(&p.p0).all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn battery_passes() {
        let report = run_battery().unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
        assert!(report.passed);
    }
}
