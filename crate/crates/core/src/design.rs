//! The conflict graph design, its closed-form event probabilities and
//! covariances, and two baseline designs.

use crate::error::{Error, Result};
use crate::estimand::{Contrast, Contrasts, Estimand};
use crate::graph::{largest_eigenvalue, Graph, SpectralResult, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::ordering::{eigenvector_ordering, sequential_degree_ordering, ImportanceOrdering};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const DEFAULT_R: f64 = 2.0;

/// Desired exposure of one unit: `e1`, `e0`, or the null option `*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Desired {
    E1,
    E0,
    Star,
}

impl Desired {
    /// Lexicographic enumeration order used by the oracle.
    pub const ALL: [Desired; 3] = [Desired::E1, Desired::E0, Desired::Star];

    pub fn contrast(self) -> Option<Contrast> {
        match self {
            Desired::E1 => Some(Contrast::E1),
            Desired::E0 => Some(Contrast::E0),
            Desired::Star => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Desired::E1 => '1',
            Desired::E0 => '0',
            Desired::Star => '*',
        }
    }

    pub fn from_symbol(c: char) -> Result<Self> {
        match c {
            '1' => Ok(Desired::E1),
            '0' => Ok(Desired::E0),
            '*' => Ok(Desired::Star),
            _ => Err(Error::Argument(format!("desired exposure must be one of 1, 0, *; got `{c}`"))),
        }
    }
}

impl From<Contrast> for Desired {
    fn from(k: Contrast) -> Self {
        match k {
            Contrast::E1 => Desired::E1,
            Contrast::E0 => Desired::E0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub r: f64,
    pub lambda: f64,
}

impl DesignParams {
    /// Checks `r >= 1`, `λ >= 1`, and that `rλ = 1` only occurs when `h`
    /// has no conflicts between distinct units.
    pub fn new(r: f64, lambda: f64, h: &Graph) -> Result<Self> {
        if !(r.is_finite() && r >= 1.0) {
            return Err(Error::Params(format!("r must be >= 1, got {r}")));
        }
        if !(lambda.is_finite() && lambda >= 1.0 - 1e-12) {
            return Err(Error::Params(format!("lambda must be >= 1, got {lambda}")));
        }
        let p = Self { r, lambda: lambda.max(1.0) };
        if p.star_prob() <= 0.0 && h.has_non_loop_edges() {
            return Err(Error::Params("r * lambda = 1 requires a conflict graph without edges".into()));
        }
        Ok(p)
    }

    /// `Pr[U_i = e_k] = 1/(2rλ)` for each `k`.
    pub fn desire_prob(&self) -> f64 {
        1.0 / (2.0 * self.r * self.lambda)
    }

    /// `Pr[U_i = *] = 1 - 1/(rλ)`.
    pub fn star_prob(&self) -> f64 {
        (1.0 - 1.0 / (self.r * self.lambda)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignDraw {
    pub u: Vec<Desired>,
    pub z: Vec<bool>,
}

impl DesignDraw {
    pub fn u_string(&self) -> String {
        self.u.iter().map(|d| d.symbol()).collect()
    }

    pub fn z_string(&self) -> String {
        self.z.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for DesignDraw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.u_string(), self.z_string())
    }
}

/// Draws `U`, consuming exactly one uniform per unit in id order.
pub fn draw_desired<R: Rng + ?Sized>(n: usize, params: &DesignParams, rng: &mut R) -> Vec<Desired> {
    let a = params.desire_prob();
    (0..n)
        .map(|_| {
            let x: f64 = rng.random();
            if x < a {
                Desired::E1
            } else if x < 2.0 * a {
                Desired::E0
            } else {
                Desired::Star
            }
        })
        .collect()
}

/// `E_(i,k)`: `U_i = e_k` and every more important conflict neighbor drew `*`.
pub fn desired_event(i: usize, k: Contrast, u: &[Desired], ord: &ImportanceOrdering) -> bool {
    u[i] == Desired::from(k) && ord.before(i).iter().all(|&j| u[j] == Desired::Star)
}

/// Which contrast, if any, unit `i` is guaranteed to realize under `u`.
pub fn fired_contrast(i: usize, u: &[Desired], ord: &ImportanceOrdering) -> Option<Contrast> {
    let k = u[i].contrast()?;
    ord.before(i).iter().all(|&j| u[j] == Desired::Star).then_some(k)
}

/// Second stage of the design, visiting units in id order.
pub fn realize(g: &Graph, contrasts: &Contrasts, ord: &ImportanceOrdering, u: &[Desired]) -> Vec<bool> {
    let order: Vec<usize> = (0..g.n()).collect();
    realize_in_order(g, contrasts, ord, u, &order)
}

/// Second stage with an explicit visiting order. Every unit whose desired
/// event holds writes its pinned intervention onto its closed neighborhood.
pub fn realize_in_order(
    g: &Graph,
    contrasts: &Contrasts,
    ord: &ImportanceOrdering,
    u: &[Desired],
    visit: &[usize],
) -> Vec<bool> {
    let mut z = vec![false; g.n()];
    for &i in visit {
        if let Some(k) = fired_contrast(i, u, ord) {
            z[i] = false;
            for &v in g.neighbors(i) {
                z[v] = false;
            }
            for &v in contrasts.exposure(i, k).treated() {
                z[v] = true;
            }
        }
    }
    z
}

pub fn sample<R: Rng + ?Sized>(
    g: &Graph,
    contrasts: &Contrasts,
    ord: &ImportanceOrdering,
    params: &DesignParams,
    rng: &mut R,
) -> DesignDraw {
    let u = draw_desired(g.n(), params, rng);
    let z = realize(g, contrasts, ord, &u);
    DesignDraw { u, z }
}

/// `Pr[E_(i,k)] = (1/(2rλ)) (1 - 1/(rλ))^{|N_b(i)|}`, the same for both `k`.
pub fn prob_single(i: usize, ord: &ImportanceOrdering, params: &DesignParams) -> f64 {
    params.desire_prob() * params.star_prob().powi(ord.before(i).len() as i32)
}

fn union_len(a: &[usize], b: &[usize]) -> usize {
    a.len() + b.len() - intersection_len(a, b)
}

fn intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut x, mut y, mut c) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                x += 1;
                y += 1;
            }
        }
    }
    c
}

/// `Pr[E_(i,k) ∩ E_(j,ℓ)]`: zero for conflicting pairs (and for `i = j`,
/// `k ≠ ℓ`), otherwise `(1/(2rλ))² (1 - 1/(rλ))^{|N_b(i) ∪ N_b(j)|}`.
pub fn prob_pair(
    i: usize,
    k: Contrast,
    j: usize,
    l: Contrast,
    h: &Graph,
    ord: &ImportanceOrdering,
    params: &DesignParams,
) -> f64 {
    if i == j {
        return if k == l { prob_single(i, ord, params) } else { 0.0 };
    }
    if h.is_adjacent(i, j) {
        return 0.0;
    }
    let a = params.desire_prob();
    a * a * params.star_prob().powi(union_len(ord.before(i), ord.before(j)) as i32)
}

/// `Cov(1{E_(i,k)}/p_i, 1{E_(j,ℓ)}/p_j)` in closed form.
pub fn covariance_entry(
    i: usize,
    k: Contrast,
    j: usize,
    l: Contrast,
    h: &Graph,
    ord: &ImportanceOrdering,
    params: &DesignParams,
) -> f64 {
    if i == j {
        return if k == l { 1.0 / prob_single(i, ord, params) - 1.0 } else { -1.0 };
    }
    if h.is_adjacent(i, j) {
        return -1.0;
    }
    // Zero beyond distance two, where the before-sets are disjoint.
    let shared = intersection_len(ord.before(i), ord.before(j));
    if shared == 0 {
        0.0
    } else {
        params.star_prob().powi(-(shared as i32)) - 1.0
    }
}

/// Which importance ordering a [`ConflictGraphDesign`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingKind {
    #[default]
    Eigenvector,
    SequentialDegree,
}

/// Everything the design needs, resolved once.
#[derive(Debug, Clone)]
pub struct ConflictGraphDesign {
    pub g: Graph,
    pub contrasts: Contrasts,
    pub h: Graph,
    pub spectral: SpectralResult,
    pub ord: ImportanceOrdering,
    pub params: DesignParams,
}

impl ConflictGraphDesign {
    pub fn new(g: Graph, est: &Estimand, r: f64, kind: OrderingKind) -> Result<Self> {
        let contrasts = est.resolve(&g)?;
        let h = crate::estimand::build_conflict_graph(&g, est)?;
        let spectral = largest_eigenvalue(&h, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let ord = match kind {
            OrderingKind::Eigenvector => eigenvector_ordering(&h, &spectral)?,
            OrderingKind::SequentialDegree => sequential_degree_ordering(&h),
        };
        let params = DesignParams::new(r, spectral.lambda, &h)?;
        Ok(Self { g, contrasts, h, spectral, ord, params })
    }

    /// Same graph and estimand with a caller-supplied ordering.
    pub fn with_ordering(mut self, ord: ImportanceOrdering) -> Result<Self> {
        if ord.n() != self.h.n() {
            return Err(Error::Dimension { expected: self.h.n(), got: ord.n() });
        }
        self.ord = ImportanceOrdering::from_order(&self.h, ord.order().to_vec())?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DesignDraw {
        sample(&self.g, &self.contrasts, &self.ord, &self.params, rng)
    }

    pub fn realize(&self, u: &[Desired]) -> Vec<bool> {
        realize(&self.g, &self.contrasts, &self.ord, u)
    }

    pub fn prob_single(&self, i: usize) -> f64 {
        prob_single(i, &self.ord, &self.params)
    }

    pub fn prob_pair(&self, i: usize, k: Contrast, j: usize, l: Contrast) -> f64 {
        prob_pair(i, k, j, l, &self.h, &self.ord, &self.params)
    }

    pub fn covariance_entry(&self, i: usize, k: Contrast, j: usize, l: Contrast) -> f64 {
        covariance_entry(i, k, j, l, &self.h, &self.ord, &self.params)
    }
}

/// I.i.d. `Bern(p)` treatment.
pub fn bernoulli_design<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Params(format!("Bernoulli probability must lie in [0, 1], got {p}")));
    }
    Ok((0..n).map(|_| rng.random::<f64>() < p).collect())
}

/// Greedy maximal independent set scanning vertices in the given order.
pub fn greedy_mis(g: &Graph, order: &[usize]) -> Vec<usize> {
    let mut blocked = vec![false; g.n()];
    let mut set = Vec::new();
    for &v in order {
        if !blocked[v] {
            set.push(v);
            blocked[v] = true;
            for &w in g.neighbors(v) {
                blocked[w] = true;
            }
        }
    }
    set.sort_unstable();
    set
}

/// Random-greedy maximal independent set `S` over a uniform permutation;
/// units in `S` get `Bern(1/2)`, everyone else control.
pub fn independent_set_design<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Vec<bool> {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.shuffle(rng);
    let mut z = vec![false; g.n()];
    for v in greedy_mis(g, &order) {
        z[v] = rng.random_bool(0.5);
    }
    z
}
