//! Maximum-likelihood fitting of the distance latent-space model by
//! projected gradient ascent on the Bernoulli log-likelihood.

use nalgebra::DMatrix;

use crate::error::{NetcropError, Result};
use crate::generators::logistic;
use crate::graph::AdjacencyMatrix;
use crate::spectral::{ase_dense, EigenOptions};

#[derive(Debug, Clone)]
pub struct LatentFitSettings {
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Initial step size; 0 means 1/n.
    pub step_init: f64,
    pub max_backtracks: usize,
    /// Disable position updates to fit the intercept alone.
    pub optimize_positions: bool,
}

impl Default for LatentFitSettings {
    fn default() -> Self {
        Self {
            max_iters: 200,
            rel_tol: 1e-6,
            step_init: 0.0,
            max_backtracks: 40,
            optimize_positions: true,
        }
    }
}

/// Fitted intercept and positions; Z columns are centered.
#[derive(Debug, Clone)]
pub struct LatentFit {
    pub alpha: f64,
    pub z: DMatrix<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn log1p_exp(eta: f64) -> f64 {
    // log(1 + e^eta), stable for large |eta|
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

pub(crate) fn log_likelihood(adj: &[Vec<bool>], alpha: f64, z: &DMatrix<f64>) -> f64 {
    let n = z.nrows();
    let d = z.ncols();
    let mut ll = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let mut dist2 = 0.0;
            for t in 0..d {
                let diff = z[(i, t)] - z[(j, t)];
                dist2 += diff * diff;
            }
            let eta = alpha - dist2;
            if adj[i][j] {
                ll += eta;
            }
            ll -= log1p_exp(eta);
        }
    }
    ll
}

/// Analytic gradient of the log-likelihood w.r.t. (alpha, Z).
pub(crate) fn gradient(
    adj: &[Vec<bool>],
    alpha: f64,
    z: &DMatrix<f64>,
) -> (f64, DMatrix<f64>) {
    let n = z.nrows();
    let d = z.ncols();
    let mut g_alpha = 0.0;
    let mut g_z = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in i + 1..n {
            let mut dist2 = 0.0;
            for t in 0..d {
                let diff = z[(i, t)] - z[(j, t)];
                dist2 += diff * diff;
            }
            let eta = alpha - dist2;
            let resid = (if adj[i][j] { 1.0 } else { 0.0 }) - logistic(eta);
            g_alpha += resid;
            for t in 0..d {
                let diff = z[(i, t)] - z[(j, t)];
                let g = -2.0 * resid * diff;
                g_z[(i, t)] += g;
                g_z[(j, t)] -= g;
            }
        }
    }
    (g_alpha, g_z)
}

/// Bernoulli log-likelihood of (alpha, Z) for an observed network.
pub fn latent_log_likelihood(a: &AdjacencyMatrix, alpha: f64, z: &DMatrix<f64>) -> f64 {
    log_likelihood(&dense_adjacency(a), alpha, z)
}

/// Gradient of the log-likelihood in (alpha, Z).
pub fn latent_gradient(a: &AdjacencyMatrix, alpha: f64, z: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    gradient(&dense_adjacency(a), alpha, z)
}

/// 1-D Newton refinement of the intercept at fixed positions; the profile
/// likelihood in alpha is strictly concave.
fn refine_alpha(adj: &[Vec<bool>], mut alpha: f64, z: &DMatrix<f64>) -> f64 {
    let n = z.nrows();
    let d = z.ncols();
    for _ in 0..4 {
        let mut g = 0.0;
        let mut h = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let mut dist2 = 0.0;
                for t in 0..d {
                    let diff = z[(i, t)] - z[(j, t)];
                    dist2 += diff * diff;
                }
                let p = logistic(alpha - dist2);
                g += (if adj[i][j] { 1.0 } else { 0.0 }) - p;
                h -= p * (1.0 - p);
            }
        }
        if h >= -1e-12 {
            break;
        }
        let step = (-g / h).clamp(-4.0, 4.0);
        alpha += step;
        if step.abs() < 1e-10 {
            break;
        }
    }
    alpha
}

fn center_columns(z: &mut DMatrix<f64>) {
    let n = z.nrows() as f64;
    for mut col in z.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}

fn dense_adjacency(a: &AdjacencyMatrix) -> Vec<Vec<bool>> {
    let n = a.n();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for &j in a.neighbors(i) {
            adj[i][j as usize] = true;
        }
    }
    adj
}

/// Fits (alpha, Z) by gradient ascent with backtracking line search and
/// column-centering projection. Initialization: Z from the spectral
/// embedding of the density-centered adjacency rescaled to unit average row
/// norm; alpha from the logit of the edge density.
pub fn fit_latent(
    a: &AdjacencyMatrix,
    d: usize,
    settings: &LatentFitSettings,
) -> Result<LatentFit> {
    let n = a.n();
    if d == 0 {
        return Err(NetcropError::Domain("d must be >= 1".into()));
    }
    if n < 2 {
        return Err(NetcropError::Domain("need at least 2 nodes".into()));
    }
    let adj = dense_adjacency(a);
    let density = a.density().clamp(1e-6, 1.0 - 1e-6);
    let mut alpha = (density / (1.0 - density)).ln();

    let mut z = if settings.optimize_positions {
        let centered = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                (if adj[i][j] { 1.0 } else { 0.0 }) - density
            }
        });
        let emb = ase_dense(&centered, d, &EigenOptions::default())?;
        let mut z = emb.coords;
        center_columns(&mut z);
        // rescale so the mean pairwise squared distance matches the 2d of
        // standard-normal positions, then put the intercept on the same
        // scale: logistic(alpha - mean dist^2) = density
        let mean_sq: f64 = z.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let target = 2.0 * d as f64;
        // E||z_i - z_j||^2 = 2 * mean row norm^2 for centered z
        if mean_sq > 1e-12 {
            z *= (target / (2.0 * mean_sq)).sqrt();
        }
        alpha += target;
        z
    } else {
        DMatrix::zeros(n, d)
    };

    let step0 = if settings.step_init > 0.0 {
        settings.step_init
    } else {
        1.0 / n as f64
    };
    let mut ll = log_likelihood(&adj, alpha, &z);
    let mut converged = false;
    let mut iterations = 0;
    // carried across iterations: grow on acceptance, shrink on rejection
    let mut step_carry = step0;

    for iter in 0..settings.max_iters {
        iterations = iter + 1;
        if settings.optimize_positions {
            let refined = refine_alpha(&adj, alpha, &z);
            if refined != alpha {
                let new_ll = log_likelihood(&adj, refined, &z);
                if new_ll > ll {
                    alpha = refined;
                    ll = new_ll;
                }
            }
        }
        let (g_alpha, g_z) = gradient(&adj, alpha, &z);
        if !g_alpha.is_finite() || g_z.iter().any(|v| !v.is_finite()) {
            return Err(NetcropError::Numerical(format!(
                "NaN in gradient at iteration {iter}"
            )));
        }
        let mut step = step_carry;
        let mut accepted = false;
        for _ in 0..settings.max_backtracks {
            let new_alpha = alpha + step * g_alpha;
            let mut new_z = if settings.optimize_positions {
                let mut nz = &z + &g_z * step;
                center_columns(&mut nz);
                nz
            } else {
                z.clone()
            };
            let new_ll = log_likelihood(&adj, new_alpha, &new_z);
            if new_ll > ll {
                let rel = (new_ll - ll) / ll.abs().max(1.0);
                alpha = new_alpha;
                std::mem::swap(&mut z, &mut new_z);
                debug_assert!(new_ll >= ll);
                ll = new_ll;
                accepted = true;
                step_carry = step * 2.0;
                if rel < settings.rel_tol {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true; // no ascent direction at line-search resolution
            break;
        }
        if converged {
            break;
        }
    }

    if !ll.is_finite() {
        return Err(NetcropError::Numerical("non-finite log-likelihood".into()));
    }
    Ok(LatentFit {
        alpha,
        z,
        log_likelihood: ll,
        iterations,
        converged,
    })
}
