//! Samplers for SBM, DCBM, RDPG, and distance latent-space networks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{NetcropError, Result};
use crate::graph::AdjacencyMatrix;

/// Blockmodel specification: node count, community count, connectivity
/// matrix, and whether per-node degree parameters are drawn.
#[derive(Debug, Clone)]
pub struct BlockmodelSpec {
    pub n: usize,
    pub k: usize,
    pub b: DMatrix<f64>,
    pub degree_corrected: bool,
}

impl BlockmodelSpec {
    pub fn new(n: usize, k: usize, b: DMatrix<f64>, degree_corrected: bool) -> Result<Self> {
        if k == 0 {
            return Err(NetcropError::Domain("K must be >= 1".into()));
        }
        if b.nrows() != k || b.ncols() != k {
            return Err(NetcropError::Domain(format!(
                "B must be {k}x{k}, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        for i in 0..k {
            for j in 0..k {
                let v = b[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(NetcropError::Domain(format!("B[{i},{j}] = {v} not in [0,1]")));
                }
                if (v - b[(j, i)]).abs() > 1e-12 {
                    return Err(NetcropError::Domain("B must be symmetric".into()));
                }
            }
        }
        Ok(Self {
            n,
            k,
            b,
            degree_corrected,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RdpgSpec {
    pub n: usize,
    pub d: usize,
    pub zeta: f64,
}

impl RdpgSpec {
    pub fn new(n: usize, d: usize, zeta: f64) -> Result<Self> {
        if d == 0 {
            return Err(NetcropError::Domain("d must be >= 1".into()));
        }
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(NetcropError::Domain(format!("zeta = {zeta} not in (0,1]")));
        }
        Ok(Self { n, d, zeta })
    }
}

#[derive(Debug, Clone)]
pub struct LatentSpec {
    pub n: usize,
    pub d: usize,
    /// Intercept on the log-odds scale.
    pub alpha: f64,
}

impl LatentSpec {
    pub fn new(n: usize, d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(NetcropError::Domain("d must be >= 1".into()));
        }
        Ok(Self { n, d, alpha })
    }
}

/// Planted-partition connectivity matrix: diagonal `alpha`, off-diagonal
/// `alpha * beta`.
pub fn planted_partition_b(k: usize, alpha: f64, beta: f64) -> Result<DMatrix<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(NetcropError::Domain(format!("alpha = {alpha} not in (0,1]")));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(NetcropError::Domain(format!("beta = {beta} not in [0,1]")));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha
        } else {
            alpha * beta
        }
    }))
}

/// Solves for the planted-partition `alpha` that hits a target mean degree
/// under uniform random labels, by bisection on the closed-form expectation.
/// `psi_mean` is the mean degree parameter (1 for plain SBM, 4/3 for the
/// 1/Beta(4,1) law).
pub fn alpha_for_mean_degree(
    n: usize,
    k: usize,
    beta: f64,
    target_mean_degree: f64,
    psi_mean: f64,
) -> Result<f64> {
    let c = (1.0 + beta * (k as f64 - 1.0)) / k as f64;
    let expected = |alpha: f64| (n as f64 - 1.0) * alpha * c * psi_mean * psi_mean;
    if expected(1.0) < target_mean_degree {
        return Err(NetcropError::Domain(format!(
            "target mean degree {target_mean_degree} unattainable with beta={beta}"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < target_mean_degree {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Degree parameters drawn iid as 1/U with U ~ Beta(4, 1); every draw >= 1.
pub fn sample_dcbm_degrees(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let beta = Beta::new(4.0, 1.0).unwrap();
    (0..n).map(|_| 1.0 / beta.sample(rng)).collect()
}

/// Samples a blockmodel network. `labels` may be supplied or drawn uniformly
/// at random. Returns the adjacency, the true labels, and the degree
/// parameters (all ones when not degree corrected). Realized probabilities
/// `B[g_i][g_j] psi_i psi_j` are clipped to [0, 1].
pub fn sample_blockmodel(
    spec: &BlockmodelSpec,
    labels: Option<Vec<usize>>,
    rng: &mut impl Rng,
) -> Result<(AdjacencyMatrix, Vec<usize>, Vec<f64>)> {
    let n = spec.n;
    let labels = match labels {
        Some(l) => {
            if l.len() != n || l.iter().any(|&g| g >= spec.k) {
                return Err(NetcropError::Domain("bad label vector".into()));
            }
            l
        }
        None => (0..n).map(|_| rng.gen_range(0..spec.k)).collect(),
    };
    let psi: Vec<f64> = if spec.degree_corrected {
        sample_dcbm_degrees(n, rng)
    } else {
        vec![1.0; n]
    };
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = (spec.b[(labels[i], labels[j])] * psi[i] * psi[j]).clamp(0.0, 1.0);
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let a = AdjacencyMatrix::from_edges(n, edges)?;
    Ok((a, labels, psi))
}

/// Samples an RDPG: X entries U(0,1), P = zeta * X X^T / max(X X^T).
/// The maximum entry of P is exactly zeta.
pub fn sample_rdpg(
    spec: &RdpgSpec,
    rng: &mut impl Rng,
) -> Result<(AdjacencyMatrix, DMatrix<f64>, DMatrix<f64>)> {
    let (n, d) = (spec.n, spec.d);
    let x = DMatrix::from_fn(n, d, |_, _| rng.gen::<f64>());
    let mut p = &x * x.transpose();
    let max = p.iter().fold(0.0_f64, |m, &v| m.max(v));
    if max > 0.0 {
        p *= spec.zeta / max;
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p[(i, j)] {
                edges.push((i, j));
            }
        }
    }
    let a = AdjacencyMatrix::from_edges(n, edges)?;
    Ok((a, x, p))
}

pub fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Samples a distance latent-space network: z_i ~ N(0, I_d),
/// P_ij = logistic(alpha - ||z_i - z_j||^2).
pub fn sample_latent(
    spec: &LatentSpec,
    rng: &mut impl Rng,
) -> Result<(AdjacencyMatrix, DMatrix<f64>, f64)> {
    let (n, d) = (spec.n, spec.d);
    let z = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let dist2: f64 = (0..d).map(|k| (z[(i, k)] - z[(j, k)]).powi(2)).sum();
            let p = logistic(spec.alpha - dist2);
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let a = AdjacencyMatrix::from_edges(n, edges)?;
    Ok((a, z, spec.alpha))
}
