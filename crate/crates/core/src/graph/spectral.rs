//! Dominant eigenpair of a (self-loop-inclusive) adjacency matrix.

use super::Graph;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Largest eigenvalue over all components.
    pub lambda: f64,
    /// Perron vector; nonnegative with unit 2-norm on each component.
    pub vector: Vec<f64>,
    /// Total power iterations across components.
    pub iterations: usize,
    /// Worst relative residual `‖Av − λv‖∞ / λ` over components.
    pub residual: f64,
}

fn matvec(g: &Graph, comp: &[usize], local: &[usize], x: &[f64], y: &mut [f64]) {
    for (a, &v) in comp.iter().enumerate() {
        let mut acc = if g.has_self_loop(v) { x[a] } else { 0.0 };
        for &w in g.neighbors(v) {
            acc += x[local[w]];
        }
        y[a] = acc;
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Power iteration on each connected component of `g`.
///
/// Iterates on `A + I`, which has the same eigenvectors as `A` and a strictly
/// dominant top eigenvalue even for bipartite loop-free components. Starts
/// from the normalized all-ones vector, which overlaps the Perron vector.
/// A component converges once its relative residual is at most `tol`.
pub fn largest_eigenvalue(g: &Graph, tol: f64, max_iter: usize) -> Result<SpectralResult> {
    let n = g.n();
    if n == 0 {
        return Err(Error::Argument("largest_eigenvalue needs at least one vertex".into()));
    }
    let mut local = vec![0usize; n];
    let mut vector = vec![0.0; n];
    let mut lambda = 0.0f64;
    let mut iterations = 0;
    let mut residual = 0.0f64;

    for comp in g.components() {
        for (a, &v) in comp.iter().enumerate() {
            local[v] = a;
        }
        let m = comp.len();
        let mut x = vec![1.0 / (m as f64).sqrt(); m];
        let mut y = vec![0.0; m];
        let mut comp_lambda;
        let mut it = 0;
        loop {
            matvec(g, &comp, &local, &x, &mut y);
            comp_lambda = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            let res = x.iter().zip(&y).map(|(a, b)| (b - comp_lambda * a).abs()).fold(0.0, f64::max);
            let scale = comp_lambda.abs().max(f64::MIN_POSITIVE);
            let rel = if comp_lambda == 0.0 && res == 0.0 { 0.0 } else { res / scale };
            if rel <= tol {
                residual = residual.max(rel);
                break;
            }
            it += 1;
            if it > max_iter {
                return Err(Error::NoConvergence { iterations: iterations + it, residual: rel });
            }
            // Shifted step: x <- (A + I) x, normalized.
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi += xi;
            }
            let nrm = norm2(&y);
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = yi / nrm;
            }
        }
        iterations += it;
        lambda = lambda.max(comp_lambda);
        for (a, &v) in comp.iter().enumerate() {
            vector[v] = x[a].max(0.0);
        }
    }
    Ok(SpectralResult { lambda, vector, iterations, residual })
}
