//! Replicate sweeps comparing the conflict graph design with baseline
//! designs on a fixed graph and fixed potential outcomes.

use crate::design::{bernoulli_design, independent_set_design, ConflictGraphDesign, OrderingKind, DEFAULT_R};
use crate::error::{Error, Result};
use crate::estimand::{Contrast, Contrasts, Estimand};
use crate::estimator::{
    chebyshev_half_width, exact_variance_modified, lambda_v_cached, modified_ht, realized_contrast, standard_ht,
    true_effect, variance_bound, vb_estimator, wald_half_width, ExposureProbs, OutcomeTable,
};
use crate::graph::{
    clique_of_cliques, erdos_renyi, hub_cliques, path, preferential_attachment, read_edge_list, star, Graph,
    HubCliquesLayout,
};
use crate::oracle::{enumerate_design, exact_exposure_probs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GraphSpec {
    PreferentialAttachment { n: usize, m: usize, r_exp: f64 },
    ErdosRenyi { n: usize, p: f64 },
    Star { n: usize },
    Path { n: usize },
    HubCliques { n: usize },
    CliqueOfCliques { n: usize },
    File { path: PathBuf },
}

impl GraphSpec {
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Graph> {
        match self {
            GraphSpec::PreferentialAttachment { n, m, r_exp } => preferential_attachment(*n, *m, *r_exp, rng),
            GraphSpec::ErdosRenyi { n, p } => Ok(erdos_renyi(*n, *p, rng)),
            GraphSpec::Star { n } => Ok(star(*n)),
            GraphSpec::Path { n } => Ok(path(*n)),
            GraphSpec::HubCliques { n } => hub_cliques(*n),
            GraphSpec::CliqueOfCliques { n } => clique_of_cliques(*n),
            GraphSpec::File { path } => read_edge_list(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum OutcomeModel {
    /// `y0 ~ N(1,1)`, `y1 ~ N(2,1)·deg^{1/2}`.
    Large,
    /// `y0 ~ N(1,1)`, `y1 ~ N(2,1)·deg^{1/4}`.
    Medium,
    /// On a hub-and-blocks graph of `n` block vertices: `y0 = √t` on the
    /// secondary hubs, zero elsewhere; `y1 ≡ 0`.
    HubSlowRate {
        n: usize,
    },
    File {
        path: PathBuf,
    },
}

pub fn gen_outcomes<R: Rng + ?Sized>(g: &Graph, model: &OutcomeModel, rng: &mut R) -> Result<OutcomeTable> {
    let n = g.n();
    let degree_model = |power: f64, rng: &mut R| {
        let a1 = Normal::new(1.0, 1.0).expect("valid normal");
        let a2 = Normal::new(2.0, 1.0).expect("valid normal");
        let mut y1 = Vec::with_capacity(n);
        let mut y0 = Vec::with_capacity(n);
        for i in 0..n {
            y0.push(a1.sample(rng));
            y1.push(a2.sample(rng) * (g.degree(i) as f64).powf(power));
        }
        OutcomeTable::new(y1, y0)
    };
    match model {
        OutcomeModel::Large => degree_model(0.5, rng),
        OutcomeModel::Medium => degree_model(0.25, rng),
        OutcomeModel::HubSlowRate { n: blocks } => {
            let layout = HubCliquesLayout::new(*blocks)?;
            if layout.total_vertices() != n {
                return Err(Error::Dimension { expected: layout.total_vertices(), got: n });
            }
            let mut y0 = vec![0.0; n];
            let t = (layout.block_size as f64).sqrt();
            for &k in &layout.secondary {
                y0[k] = t;
            }
            OutcomeTable::new(vec![0.0; n], y0)
        }
        OutcomeModel::File { path } => {
            let o = OutcomeTable::read_csv(path)?;
            if o.n() != n {
                return Err(Error::Dimension { expected: n, got: o.n() });
            }
            Ok(o)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Cgd,
    Bernoulli,
    IndependentSet,
}

impl DesignKind {
    pub fn name(self) -> &'static str {
        match self {
            DesignKind::Cgd => "cgd",
            DesignKind::Bernoulli => "bernoulli",
            DesignKind::IndependentSet => "independent_set",
        }
    }

    fn tag(self) -> u64 {
        match self {
            DesignKind::Cgd => 1,
            DesignKind::Bernoulli => 2,
            DesignKind::IndependentSet => 3,
        }
    }
}

fn default_designs() -> Vec<DesignKind> {
    vec![DesignKind::Cgd, DesignKind::Bernoulli, DesignKind::IndependentSet]
}
fn default_replicates() -> usize {
    1000
}
fn default_mc() -> usize {
    10_000
}
fn default_alpha() -> f64 {
    0.05
}
fn default_r() -> f64 {
    DEFAULT_R
}
fn default_p() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_exact_max() -> usize {
    10
}
fn default_estimand() -> Estimand {
    Estimand::DirectEffect
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub graph: GraphSpec,
    #[serde(default = "default_estimand")]
    pub estimand: Estimand,
    #[serde(default = "default_designs")]
    pub designs: Vec<DesignKind>,
    pub outcomes: OutcomeModel,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Auxiliary draws per design for standard-estimator exposure probabilities.
    #[serde(default = "default_mc")]
    pub mc_prob_draws: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    /// Treatment probability of the Bernoulli baseline.
    #[serde(default = "default_p")]
    pub bernoulli_p: f64,
    #[serde(default)]
    pub ordering: OrderingKind,
    /// Whether to compute `λ(V)` (and with it VB and the intervals).
    #[serde(default = "default_true")]
    pub compute_lambda_v: bool,
    /// Largest `n` for which the conflict graph design uses exact exposure
    /// probabilities instead of Monte Carlo ones.
    #[serde(default = "default_exact_max")]
    pub exact_prob_max_n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn new(graph: GraphSpec, estimand: Estimand, outcomes: OutcomeModel) -> Self {
        Self {
            graph,
            estimand,
            designs: default_designs(),
            outcomes,
            replicates: default_replicates(),
            mc_prob_draws: default_mc(),
            alpha: default_alpha(),
            r: default_r(),
            bernoulli_p: default_p(),
            ordering: OrderingKind::default(),
            compute_lambda_v: true,
            exact_prob_max_n: default_exact_max(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Params("replicates must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Params(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Summary for one (design, estimator) pair. Fields that do not apply are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub design: String,
    pub estimator: String,
    pub n: usize,
    pub lambda_h: f64,
    pub dmax_h: usize,
    pub lambda_v: Option<f64>,
    pub mean_tau_hat: Option<f64>,
    pub true_tau: f64,
    pub emp_var: Option<f64>,
    pub mse: Option<f64>,
    pub exact_var: Option<f64>,
    pub vb: Option<f64>,
    pub coverage_cheb: Option<f64>,
    pub width_cheb: Option<f64>,
    pub coverage_wald: Option<f64>,
    pub width_wald: Option<f64>,
    pub coverage_cheb_exact_vb: Option<f64>,
    pub width_cheb_exact_vb: Option<f64>,
    pub coverage_wald_exact_vb: Option<f64>,
    pub width_wald_exact_vb: Option<f64>,
    pub vbhat_ratio_var: Option<f64>,
    pub replicates: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub rows: Vec<SimRow>,
}

pub const CSV_COLUMNS: [&str; 18] = [
    "design",
    "estimator",
    "n",
    "lambda_H",
    "dmax_H",
    "lambda_V",
    "mean_tau_hat",
    "true_tau",
    "emp_var",
    "exact_var",
    "vb",
    "coverage_cheb",
    "width_cheb",
    "coverage_wald",
    "width_wald",
    "vbhat_ratio_var",
    "replicates",
    "dropped",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SimReport {
    pub fn row(&self, design: DesignKind, estimator: &str) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.design == design.name() && r.estimator == estimator)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.design.clone(),
                r.estimator.clone(),
                r.n.to_string(),
                r.lambda_h.to_string(),
                r.dmax_h.to_string(),
                opt(r.lambda_v),
                opt(r.mean_tau_hat),
                r.true_tau.to_string(),
                opt(r.emp_var),
                opt(r.exact_var),
                opt(r.vb),
                opt(r.coverage_cheb),
                opt(r.width_cheb),
                opt(r.coverage_wald),
                opt(r.width_wald),
                opt(r.vbhat_ratio_var),
                r.replicates.to_string(),
                r.dropped.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

pub fn emit(report: &SimReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report.to_csv()?,
        ReportFormat::Json => report.to_json()?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| pairwise_sum(xs) / xs.len() as f64)
}

/// Unbiased sample variance; undefined below two values.
fn sample_var(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    Some(pairwise_sum(&sq) / (xs.len() - 1) as f64)
}

fn frac(flags: &[bool]) -> Option<f64> {
    (!flags.is_empty()).then(|| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
}

/// Fixed salt separating the streams of different purposes.
fn stream_rng(seed: u64, design: DesignKind, purpose: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (design.tag() << 56) ^ (purpose << 48));
    rng.set_stream(stream);
    rng
}

const PURPOSE_REPLICATE: u64 = 1;
const PURPOSE_PROBS: u64 = 2;

/// Runs the full protocol: graph and outcomes are generated once from
/// `cfg.seed`, then every design is replicated on them.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let g = cfg.graph.build(&mut rng)?;
    let outcomes = gen_outcomes(&g, &cfg.outcomes, &mut rng)?;
    simulate(&g, &outcomes, cfg)
}

/// Replicates every configured design on a given graph and outcome table.
pub fn simulate(g: &Graph, outcomes: &OutcomeTable, cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    if outcomes.n() != g.n() {
        return Err(Error::Dimension { expected: g.n(), got: outcomes.n() });
    }
    let design = ConflictGraphDesign::new(g.clone(), &cfg.estimand, cfg.r, cfg.ordering)?;
    let ctx = Context {
        design: &design,
        outcomes,
        cfg,
        tau: true_effect(outcomes),
        lambda_h: design.lambda(),
        dmax_h: design.h.max_loop_degree(),
    };
    let mut rows = Vec::new();
    for &kind in &cfg.designs {
        match kind {
            DesignKind::Cgd => {
                rows.push(ctx.cgd_modified()?);
                rows.push(ctx.standard_row(kind)?);
            }
            _ => rows.push(ctx.standard_row(kind)?),
        }
    }
    Ok(SimReport { rows })
}

struct Context<'a> {
    design: &'a ConflictGraphDesign,
    outcomes: &'a OutcomeTable,
    cfg: &'a SimConfig,
    tau: f64,
    lambda_h: f64,
    dmax_h: usize,
}

struct ModifiedRep {
    tau_hat: f64,
    vb_hat: f64,
}

impl Context<'_> {
    fn blank_row(&self, kind: DesignKind, estimator: &str) -> SimRow {
        SimRow {
            design: kind.name().into(),
            estimator: estimator.into(),
            n: self.outcomes.n(),
            lambda_h: self.lambda_h,
            dmax_h: self.dmax_h,
            lambda_v: None,
            mean_tau_hat: None,
            true_tau: self.tau,
            emp_var: None,
            mse: None,
            exact_var: None,
            vb: None,
            coverage_cheb: None,
            width_cheb: None,
            coverage_wald: None,
            width_wald: None,
            coverage_cheb_exact_vb: None,
            width_cheb_exact_vb: None,
            coverage_wald_exact_vb: None,
            width_wald_exact_vb: None,
            vbhat_ratio_var: None,
            replicates: self.cfg.replicates,
            dropped: 0,
        }
    }

    fn draw_z(&self, kind: DesignKind, rng: &mut ChaCha8Rng) -> Result<Vec<bool>> {
        match kind {
            DesignKind::Cgd => Ok(self.design.sample(rng).z),
            DesignKind::Bernoulli => bernoulli_design(self.outcomes.n(), self.cfg.bernoulli_p, rng),
            DesignKind::IndependentSet => Ok(independent_set_design(&self.design.g, rng)),
        }
    }

    fn cgd_modified(&self) -> Result<SimRow> {
        let d = self.design;
        let (ord, params) = (&d.ord, &d.params);
        let reps: Vec<ModifiedRep> = (0..self.cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream_rng(self.cfg.seed, DesignKind::Cgd, PURPOSE_REPLICATE, rep as u64);
                let draw = d.sample(&mut rng);
                ModifiedRep {
                    tau_hat: modified_ht(self.outcomes, &draw, ord, params),
                    vb_hat: vb_estimator(self.outcomes, &draw, ord, params, 1.0),
                }
            })
            .collect();
        let taus: Vec<f64> = reps.iter().map(|r| r.tau_hat).collect();
        let mut row = self.blank_row(DesignKind::Cgd, "modified");
        row.mean_tau_hat = mean(&taus);
        row.emp_var = sample_var(&taus);
        row.mse = mean(&taus.iter().map(|t| (t - self.tau).powi(2)).collect::<Vec<_>>());
        row.exact_var = Some(exact_variance_modified(self.outcomes, &d.h, ord, params));
        if self.cfg.compute_lambda_v {
            let lam_v = lambda_v_cached(&d.h, ord, params)?;
            let vb = variance_bound(self.outcomes, lam_v);
            let alpha = self.cfg.alpha;
            row.lambda_v = Some(lam_v);
            row.vb = Some(vb);
            // vb_hat was computed with λ(V) = 1; it is linear in λ(V).
            let vb_hats: Vec<f64> = reps.iter().map(|r| r.vb_hat * lam_v).collect();
            let cheb: Vec<f64> = vb_hats.iter().map(|&v| chebyshev_half_width(v, alpha)).collect::<Result<_>>()?;
            let wald: Vec<f64> = vb_hats.iter().map(|&v| wald_half_width(v, alpha)).collect::<Result<_>>()?;
            let covered =
                |w: &[f64]| -> Vec<bool> { taus.iter().zip(w).map(|(t, w)| (t - self.tau).abs() <= *w).collect() };
            row.coverage_cheb = frac(&covered(&cheb));
            row.width_cheb = mean(&cheb).map(|w| 2.0 * w);
            row.coverage_wald = frac(&covered(&wald));
            row.width_wald = mean(&wald).map(|w| 2.0 * w);
            let cheb_vb = chebyshev_half_width(vb, alpha)?;
            let wald_vb = wald_half_width(vb, alpha)?;
            row.coverage_cheb_exact_vb = frac(&covered(&vec![cheb_vb; taus.len()]));
            row.width_cheb_exact_vb = Some(2.0 * cheb_vb);
            row.coverage_wald_exact_vb = frac(&covered(&vec![wald_vb; taus.len()]));
            row.width_wald_exact_vb = Some(2.0 * wald_vb);
            if vb > 0.0 {
                row.vbhat_ratio_var = sample_var(&vb_hats.iter().map(|v| v / vb).collect::<Vec<_>>());
            }
        }
        Ok(row)
    }

    fn exposure_probs(&self, kind: DesignKind) -> Result<ExposureProbs> {
        let d = self.design;
        if kind == DesignKind::Cgd && d.n() <= self.cfg.exact_prob_max_n {
            let dist = enumerate_design(d)?;
            return Ok(exact_exposure_probs(&dist, &d.g, &d.contrasts));
        }
        let n = d.n();
        let counts = (0..self.cfg.mc_prob_draws)
            .into_par_iter()
            .map(|t| -> Result<Vec<bool>> {
                let mut rng = stream_rng(self.cfg.seed, kind, PURPOSE_PROBS, t as u64);
                self.draw_z(kind, &mut rng)
            })
            .try_fold(
                || (vec![0u64; n], vec![0u64; n]),
                |(mut c1, mut c0), z| -> Result<_> {
                    let z = z?;
                    count_exposures(&d.g, &d.contrasts, &z, &mut c1, &mut c0);
                    Ok((c1, c0))
                },
            )
            .try_reduce(
                || (vec![0u64; n], vec![0u64; n]),
                |(mut a1, mut a0), (b1, b0)| {
                    for i in 0..n {
                        a1[i] += b1[i];
                        a0[i] += b0[i];
                    }
                    Ok((a1, a0))
                },
            )?;
        let t = self.cfg.mc_prob_draws.max(1) as f64;
        Ok(ExposureProbs {
            p1: counts.0.iter().map(|&c| c as f64 / t).collect(),
            p0: counts.1.iter().map(|&c| c as f64 / t).collect(),
        })
    }

    fn standard_row(&self, kind: DesignKind) -> Result<SimRow> {
        let d = self.design;
        let probs = self.exposure_probs(kind)?;
        let results: Vec<Option<f64>> = (0..self.cfg.replicates)
            .into_par_iter()
            .map(|rep| -> Result<Option<f64>> {
                let mut rng = stream_rng(self.cfg.seed, kind, PURPOSE_REPLICATE, rep as u64);
                let z = self.draw_z(kind, &mut rng)?;
                match standard_ht(self.outcomes, &d.g, &d.contrasts, &z, &probs) {
                    Ok(v) => Ok(Some(v)),
                    Err(Error::Positivity { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        let taus: Vec<f64> = results.iter().flatten().copied().collect();
        let mut row = self.blank_row(kind, "standard");
        row.dropped = results.len() - taus.len();
        row.mean_tau_hat = mean(&taus);
        row.emp_var = sample_var(&taus);
        row.mse = mean(&taus.iter().map(|t| (t - self.tau).powi(2)).collect::<Vec<_>>());
        Ok(row)
    }
}

fn count_exposures(g: &Graph, contrasts: &Contrasts, z: &[bool], c1: &mut [u64], c0: &mut [u64]) {
    for i in 0..g.n() {
        match realized_contrast(g, contrasts, i, z) {
            Some(Contrast::E1) => c1[i] += 1,
            Some(Contrast::E0) => c0[i] += 1,
            None => {}
        }
    }
}
