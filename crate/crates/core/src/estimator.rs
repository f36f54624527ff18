//! Horvitz–Thompson estimators, exact variance, the `V`-matrix variance
//! bound and its estimator, and confidence intervals.

use crate::design::{fired_contrast, prob_single, ConflictGraphDesign, DesignDraw, DesignParams};
use crate::error::{Error, Result};
use crate::estimand::{Contrast, Contrasts};
use crate::graph::Graph;
use crate::ordering::ImportanceOrdering;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::{Mutex, OnceLock};

/// Potential outcomes under the two contrastive exposures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OutcomeRow {
    unit: usize,
    y1: f64,
    y0: f64,
}

impl OutcomeTable {
    pub fn new(y1: Vec<f64>, y0: Vec<f64>) -> Result<Self> {
        if y1.len() != y0.len() {
            return Err(Error::Dimension { expected: y1.len(), got: y0.len() });
        }
        if let Some(i) = y1.iter().chain(&y0).position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("outcome #{i} is not finite")));
        }
        Ok(Self { y1, y0 })
    }

    pub fn zeros(n: usize) -> Self {
        Self { y1: vec![0.0; n], y0: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.y1.len()
    }

    pub fn get(&self, i: usize, k: Contrast) -> f64 {
        match k {
            Contrast::E1 => self.y1[i],
            Contrast::E0 => self.y0[i],
        }
    }

    /// Reads a `unit,y1,y0` CSV; every unit `0..n` must appear exactly once.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut rows: Vec<OutcomeRow> = reader.deserialize().collect::<std::result::Result<_, _>>()?;
        rows.sort_by_key(|r| r.unit);
        for (idx, row) in rows.iter().enumerate() {
            if row.unit != idx {
                return Err(Error::Argument(format!("outcome units must be exactly 0..{}", rows.len())));
            }
        }
        Self::new(rows.iter().map(|r| r.y1).collect(), rows.iter().map(|r| r.y0).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for i in 0..self.n() {
            w.serialize(OutcomeRow { unit: i, y1: self.y1[i], y0: self.y0[i] })?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn mean_square_sum(&self) -> f64 {
        let n = self.n() as f64;
        (self.y1.iter().map(|v| v * v).sum::<f64>() + self.y0.iter().map(|v| v * v).sum::<f64>()) / n
    }
}

/// `τ = (1/n) Σ (y1_i - y0_i)`.
pub fn true_effect(outcomes: &OutcomeTable) -> f64 {
    let n = outcomes.n() as f64;
    outcomes.y1.iter().zip(&outcomes.y0).map(|(a, b)| a - b).sum::<f64>() / n
}

/// Modified HT estimator indexed by desired exposure events.
pub fn modified_ht(outcomes: &OutcomeTable, draw: &DesignDraw, ord: &ImportanceOrdering, params: &DesignParams) -> f64 {
    let n = outcomes.n();
    let mut acc = 0.0;
    for i in 0..n {
        if let Some(k) = fired_contrast(i, &draw.u, ord) {
            acc += k.sign() * outcomes.get(i, k) / prob_single(i, ord, params);
        }
    }
    acc / n as f64
}

/// Which contrastive exposure, if either, unit `i` actually receives under `z`.
pub fn realized_contrast(g: &Graph, contrasts: &Contrasts, i: usize, z: &[bool]) -> Option<Contrast> {
    // Each exposure lies inside Ñ(i), so it matches iff its units are all
    // treated and nobody else in Ñ(i) is.
    let treated = usize::from(z[i]) + g.neighbors(i).iter().filter(|&&v| z[v]).count();
    Contrast::BOTH.into_iter().find(|&k| {
        let e = contrasts.exposure(i, k).treated();
        e.len() == treated && e.iter().all(|&v| z[v])
    })
}

/// Marginal probabilities `Pr[d_i(Z) = e_k]` used by the standard estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureProbs {
    pub p1: Vec<f64>,
    pub p0: Vec<f64>,
}

impl ExposureProbs {
    pub fn get(&self, i: usize, k: Contrast) -> f64 {
        match k {
            Contrast::E1 => self.p1[i],
            Contrast::E0 => self.p0[i],
        }
    }

    /// Relative frequencies over sampled interventions.
    pub fn from_samples<I>(g: &Graph, contrasts: &Contrasts, samples: I) -> Self
    where
        I: IntoIterator<Item = Vec<bool>>,
    {
        let n = g.n();
        let (mut c1, mut c0) = (vec![0u64; n], vec![0u64; n]);
        let mut total = 0u64;
        for z in samples {
            total += 1;
            for i in 0..n {
                match realized_contrast(g, contrasts, i, &z) {
                    Some(Contrast::E1) => c1[i] += 1,
                    Some(Contrast::E0) => c0[i] += 1,
                    None => {}
                }
            }
        }
        let t = total.max(1) as f64;
        Self { p1: c1.iter().map(|&c| c as f64 / t).collect(), p0: c0.iter().map(|&c| c as f64 / t).collect() }
    }
}

/// Standard HT estimator on realized exposures. An indicator that fires with
/// recorded probability zero is a positivity violation.
pub fn standard_ht(
    outcomes: &OutcomeTable,
    g: &Graph,
    contrasts: &Contrasts,
    z: &[bool],
    probs: &ExposureProbs,
) -> Result<f64> {
    let n = outcomes.n();
    let mut acc = 0.0;
    for i in 0..n {
        if let Some(k) = realized_contrast(g, contrasts, i, z) {
            let p = probs.get(i, k);
            if p <= 0.0 {
                return Err(Error::Positivity { unit: i, contrast: k.index() as u8 });
            }
            acc += k.sign() * outcomes.get(i, k) / p;
        }
    }
    Ok(acc / n as f64)
}

/// Signed covariance matrix of the weighted desired-event indicators, indexed
/// by `(i, k)` with `k = 1` in the first `n` rows and `k = 0` in the last `n`.
///
/// Each stored unit pair keeps the entry for equal contrasts and the entry
/// for opposite contrasts (sign already applied).
#[derive(Debug, Clone, PartialEq)]
pub struct VMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64, f64)>>,
}

impl VMatrix {
    pub fn n_units(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    fn idx(&self, i: usize, k: Contrast) -> usize {
        match k {
            Contrast::E1 => i,
            Contrast::E0 => self.n + i,
        }
    }

    pub fn entry(&self, i: usize, k: Contrast, j: usize, l: Contrast) -> f64 {
        match self.rows[i].binary_search_by_key(&j, |e| e.0) {
            Ok(pos) => {
                let (_, same, cross) = self.rows[i][pos];
                if k == l {
                    same
                } else {
                    cross
                }
            }
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let (mut a1, mut a0) = (0.0, 0.0);
            for &(j, same, cross) in &self.rows[i] {
                a1 += same * x[j] + cross * x[n + j];
                a0 += cross * x[j] + same * x[n + j];
            }
            y[i] = a1;
            y[n + i] = a0;
        }
    }

    /// Dense copy, row-major `2n × 2n`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut m = vec![vec![0.0; d]; d];
        for i in 0..self.n {
            for &(j, same, cross) in &self.rows[i] {
                for k in Contrast::BOTH {
                    for l in Contrast::BOTH {
                        m[self.idx(i, k)][self.idx(j, l)] = if k == l { same } else { cross };
                    }
                }
            }
        }
        m
    }

    /// `yᵀ V y` with `y` stacked as `(y1, y0)`.
    pub fn quadratic_form(&self, outcomes: &OutcomeTable) -> f64 {
        let n = self.n;
        let mut x = outcomes.y1.clone();
        x.extend_from_slice(&outcomes.y0);
        let mut y = vec![0.0; 2 * n];
        self.matvec(&x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }
}

/// Builds `V` from closed-form covariances over pairs within conflict-graph
/// distance two.
pub fn build_v_matrix(h: &Graph, ord: &ImportanceOrdering, params: &DesignParams) -> VMatrix {
    let n = h.n();
    let rows = (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64, f64)> = h
                .ball(i, 2)
                .into_iter()
                .map(|(j, _)| {
                    let same = crate::design::covariance_entry(i, Contrast::E1, j, Contrast::E1, h, ord, params);
                    let cov_cross = crate::design::covariance_entry(i, Contrast::E1, j, Contrast::E0, h, ord, params);
                    (j, same, -cov_cross)
                })
                .filter(|&(j, s, c)| j == i || s != 0.0 || c != 0.0)
                .collect();
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    VMatrix { n, rows }
}

/// Dominant eigenpair of `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    /// Unit 2-norm, stacked as `(k = 1 block, k = 0 block)`.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Seed of the fixed pseudo-random start vector for `λ(V)`.
const V_START_SEED: u64 = 0x05ee_d0f7;

/// Power iteration on the positive semidefinite `V`, started from a fixed
/// pseudo-random vector; stops when `‖Vx - ρx‖₂ ≤ tol·ρ`.
pub fn lambda_v(v: &VMatrix, tol: f64, max_iter: usize) -> Result<EigenPair> {
    let d = v.dim();
    if d == 0 {
        return Err(Error::Argument("V has dimension zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(V_START_SEED);
    let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut x);
    let mut y = vec![0.0; d];
    let mut it = 0;
    loop {
        v.matvec(&x, &mut y);
        let rho: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let res = x.iter().zip(&y).map(|(a, b)| (b - rho * a).powi(2)).sum::<f64>().sqrt();
        let rel = if rho > 0.0 {
            res / rho
        } else if res == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if rel <= tol {
            return Ok(EigenPair { value: rho, vector: x, iterations: it, residual: rel });
        }
        it += 1;
        if it > max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: rel });
        }
        x.copy_from_slice(&y);
        normalize(&mut x);
    }
}

fn normalize(x: &mut [f64]) {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 0.0 {
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
}

pub const V_TOL: f64 = 1e-9;
pub const V_MAX_ITER: usize = 200_000;

fn lambda_v_cache() -> &'static Mutex<HashMap<u64, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn content_key(h: &Graph, ord: &ImportanceOrdering, params: &DesignParams) -> u64 {
    let mut s = DefaultHasher::new();
    h.hash(&mut s);
    ord.order().hash(&mut s);
    params.r.to_bits().hash(&mut s);
    params.lambda.to_bits().hash(&mut s);
    s.finish()
}

/// `λ(V)` for `(H, π, r)`, memoized by a content hash of those inputs.
pub fn lambda_v_cached(h: &Graph, ord: &ImportanceOrdering, params: &DesignParams) -> Result<f64> {
    let key = content_key(h, ord, params);
    if let Some(&v) = lambda_v_cache().lock().expect("cache lock").get(&key) {
        return Ok(v);
    }
    let value = lambda_v(&build_v_matrix(h, ord, params), V_TOL, V_MAX_ITER)?.value;
    lambda_v_cache().lock().expect("cache lock").insert(key, value);
    Ok(value)
}

/// Exact variance of the modified HT estimator from closed-form covariances.
pub fn exact_variance_modified(
    outcomes: &OutcomeTable,
    h: &Graph,
    ord: &ImportanceOrdering,
    params: &DesignParams,
) -> f64 {
    let n = outcomes.n();
    let tau: Vec<f64> = (0..n).map(|i| outcomes.y1[i] - outcomes.y0[i]).collect();
    let mut acc = 0.0;
    for i in 0..n {
        let (a, b) = (outcomes.y1[i], outcomes.y0[i]);
        let w = 1.0 / prob_single(i, ord, params) - 1.0;
        acc += (a * a + b * b) * w + 2.0 * a * b;
        for (j, _) in h.ball(i, 2) {
            if j != i {
                // Off-diagonal covariances do not depend on the contrasts.
                let c = crate::design::covariance_entry(i, Contrast::E1, j, Contrast::E1, h, ord, params);
                acc += c * tau[i] * tau[j];
            }
        }
    }
    acc / (n * n) as f64
}

/// `VB = (λ(V)/n) · (1/n) Σ (y1² + y0²)`.
pub fn variance_bound(outcomes: &OutcomeTable, lambda_v_value: f64) -> f64 {
    lambda_v_value / outcomes.n() as f64 * outcomes.mean_square_sum()
}

/// Unbiased estimator of [`variance_bound`] from one draw.
pub fn vb_estimator(
    outcomes: &OutcomeTable,
    draw: &DesignDraw,
    ord: &ImportanceOrdering,
    params: &DesignParams,
    lambda_v_value: f64,
) -> f64 {
    let n = outcomes.n();
    let mut acc = 0.0;
    for i in 0..n {
        if let Some(k) = fired_contrast(i, &draw.u, ord) {
            let y = outcomes.get(i, k);
            acc += y * y / prob_single(i, ord, params);
        }
    }
    lambda_v_value / n as f64 * (acc / n as f64)
}

/// Standard normal CDF by Marsaglia's Taylor series.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < -38.0 {
        return 0.0;
    }
    if x > 38.0 {
        return 1.0;
    }
    let q = x * x;
    let (mut s, mut t, mut b, mut i) = (x, 0.0, x, 1.0);
    while s != t {
        t = s;
        i += 2.0;
        b *= q / i;
        s = t + b;
    }
    0.5 + s * (-0.5 * q - 0.918_938_533_204_672_8).exp()
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - 0.918_938_533_204_672_8).exp()
}

/// Standard normal quantile: Acklam's rational approximation plus one
/// Newton step on [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let lower = 0.02425;
    let x = if p < lower {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - lower {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let dens = normal_pdf(x);
    if dens > 0.0 {
        x - (normal_cdf(x) - p) / dens
    } else {
        x
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

fn check_vb(vb_hat: f64) -> Result<()> {
    if vb_hat >= 0.0 && vb_hat.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("variance estimate must be finite and >= 0, got {vb_hat}")))
    }
}

pub fn chebyshev_half_width(vb_hat: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_vb(vb_hat)?;
    Ok(vb_hat.sqrt() / alpha.sqrt())
}

pub fn wald_half_width(vb_hat: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_vb(vb_hat)?;
    Ok(normal_quantile(1.0 - alpha / 2.0) * vb_hat.sqrt())
}

pub fn chebyshev_interval(tau_hat: f64, vb_hat: f64, alpha: f64) -> Result<(f64, f64)> {
    let w = chebyshev_half_width(vb_hat, alpha)?;
    Ok((tau_hat - w, tau_hat + w))
}

pub fn wald_interval(tau_hat: f64, vb_hat: f64, alpha: f64) -> Result<(f64, f64)> {
    let w = wald_half_width(vb_hat, alpha)?;
    Ok((tau_hat - w, tau_hat + w))
}

/// Coverage of the Wald interval when the estimator is normal with variance
/// `σ²·VB` and the bound estimate is shrunk by `1 - c·λ/n`.
pub fn predicted_coverage(alpha: f64, sigma2_ratio: f64, lam_over_n: f64, c: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&sigma2_ratio) {
        return Err(Error::Argument(format!("variance ratio must lie in [0, 1], got {sigma2_ratio}")));
    }
    let shrink = c * lam_over_n;
    if !(lam_over_n >= 0.0 && shrink < 1.0) {
        return Err(Error::Argument(format!("need lambda/n >= 0 and c*lambda/n < 1, got {shrink}")));
    }
    let arg = normal_quantile(1.0 - alpha / 2.0) * (1.0 - shrink).sqrt();
    if sigma2_ratio == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - 2.0 * (1.0 - normal_cdf(arg / sigma2_ratio.sqrt())))
}

/// Point estimate, variance quantities and intervals from one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub tau_hat: f64,
    pub vb: f64,
    pub vb_hat: f64,
    pub var_exact: Option<f64>,
    pub alpha: f64,
    pub ci_cheb: (f64, f64),
    pub ci_wald: (f64, f64),
}

impl EstimateReport {
    pub fn new(
        design: &ConflictGraphDesign,
        outcomes: &OutcomeTable,
        draw: &DesignDraw,
        lambda_v_value: f64,
        alpha: f64,
        with_exact: bool,
    ) -> Result<Self> {
        let (ord, params) = (&design.ord, &design.params);
        let tau_hat = modified_ht(outcomes, draw, ord, params);
        let vb_hat = vb_estimator(outcomes, draw, ord, params, lambda_v_value);
        Ok(Self {
            tau_hat,
            vb: variance_bound(outcomes, lambda_v_value),
            vb_hat,
            var_exact: with_exact.then(|| exact_variance_modified(outcomes, &design.h, ord, params)),
            alpha,
            ci_cheb: chebyshev_interval(tau_hat, vb_hat, alpha)?,
            ci_wald: wald_interval(tau_hat, vb_hat, alpha)?,
        })
    }
}
