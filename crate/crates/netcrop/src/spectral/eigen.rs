//! Top-k eigenpairs of symmetric operators: dense solve for small matrices,
//! Lanczos with full reorthogonalization above a size threshold.

use nalgebra::{DMatrix, DVector};

use crate::error::{NetcropError, Result};
use crate::graph::AdjacencyMatrix;

/// Symmetric linear operator.
pub trait SymOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn to_dense(&self) -> DMatrix<f64>;
}

impl SymOp for AdjacencyMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for &j in self.neighbors(i) {
                m[(i, j as usize)] = 1.0;
            }
        }
        m
    }
}

impl SymOp for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let xv = DVector::from_column_slice(x);
        let out = self * xv;
        y.copy_from_slice(out.as_slice());
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// Regularized graph Laplacian L_tau = D_tau^{-1/2} A D_tau^{-1/2} with
/// D_tau = D + tau * mean_degree * I.
pub struct RegularizedLaplacian<'a> {
    adj: &'a AdjacencyMatrix,
    inv_sqrt: Vec<f64>,
}

impl<'a> RegularizedLaplacian<'a> {
    pub fn new(adj: &'a AdjacencyMatrix, tau: f64) -> Result<Self> {
        if tau < 0.0 {
            return Err(NetcropError::Domain(format!("tau = {tau} must be >= 0")));
        }
        let mean_deg = adj.mean_degree();
        if mean_deg == 0.0 && tau == 0.0 {
            return Err(NetcropError::Degenerate(
                "edgeless graph with tau = 0".into(),
            ));
        }
        let shift = tau * mean_deg;
        let inv_sqrt: Vec<f64> = adj
            .degrees()
            .iter()
            .map(|&d| {
                let dt = d as f64 + shift;
                if dt > 0.0 {
                    1.0 / dt.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self { adj, inv_sqrt })
    }
}

impl SymOp for RegularizedLaplacian<'_> {
    fn dim(&self) -> usize {
        self.adj.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        let mut scaled = vec![0.0; n];
        for i in 0..n {
            scaled[i] = x[i] * self.inv_sqrt[i];
        }
        self.adj.matvec(&scaled, y);
        for i in 0..n {
            y[i] *= self.inv_sqrt[i];
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for &j in self.adj.neighbors(i) {
                m[(i, j as usize)] = self.inv_sqrt[i] * self.inv_sqrt[j as usize];
            }
        }
        m
    }
}

/// Eigenvalue ordering for selecting the leading k pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingMode {
    /// |lambda| descending; ties toward the larger algebraic value.
    AbsoluteDesc,
    /// lambda descending.
    AlgebraicDesc,
}

/// Leading eigenpairs: `values` ordered per mode, `vectors` column-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenBasis {
    pub fn k(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Below this dimension a dense symmetric solve is used.
    pub dense_threshold: usize,
    pub tol: f64,
    pub max_lanczos_dim: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 1024,
            tol: 1e-8,
            max_lanczos_dim: 0, // 0 = no cap below n
        }
    }
}

fn sort_order(values: &[f64], mode: OrderingMode) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    match mode {
        OrderingMode::AbsoluteDesc => idx.sort_by(|&a, &b| {
            values[b]
                .abs()
                .partial_cmp(&values[a].abs())
                .unwrap()
                .then(values[b].partial_cmp(&values[a]).unwrap())
        }),
        OrderingMode::AlgebraicDesc => {
            idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap())
        }
    }
    idx
}

/// Leading `k` eigenpairs of a symmetric operator.
pub fn top_eigenpairs(
    op: &impl SymOp,
    k: usize,
    mode: OrderingMode,
    opts: &EigenOptions,
) -> Result<EigenBasis> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(NetcropError::Domain(format!(
            "k = {k} out of range for n = {n}"
        )));
    }
    if n <= opts.dense_threshold {
        dense_eigenpairs(op, k, mode)
    } else {
        lanczos_eigenpairs(op, k, mode, opts)
    }
}

fn dense_eigenpairs(op: &impl SymOp, k: usize, mode: OrderingMode) -> Result<EigenBasis> {
    let m = op.to_dense();
    let eig = m.symmetric_eigen();
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = sort_order(&values, mode);
    let n = op.dim();
    let mut vectors = DMatrix::zeros(n, k);
    let mut out_values = Vec::with_capacity(k);
    for (col, &src) in order.iter().take(k).enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(src));
        out_values.push(values[src]);
    }
    Ok(EigenBasis {
        values: out_values,
        vectors,
    })
}

// Deterministic pseudo-random stream for start vectors.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn fresh_direction(n: usize, stream: &mut u64, basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    for _ in 0..20 {
        let mut v = DVector::from_fn(n, |_, _| {
            (splitmix64(stream) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        for b in basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-10 {
            return Some(v / norm);
        }
    }
    None
}

fn lanczos_eigenpairs(
    op: &impl SymOp,
    k: usize,
    mode: OrderingMode,
    opts: &EigenOptions,
) -> Result<EigenBasis> {
    let n = op.dim();
    let cap = if opts.max_lanczos_dim == 0 {
        n
    } else {
        opts.max_lanczos_dim.min(n)
    };
    let mut stream: u64 = 0x5eed_c0de;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new(); // beta[j] couples v_j and v_{j+1}
    let v0 = fresh_direction(n, &mut stream, &basis)
        .ok_or_else(|| NetcropError::Solver { residual: f64::NAN })?;
    basis.push(v0);
    let first_check = (2 * k + 20).min(cap);
    let mut next_check = first_check;
    let mut work = vec![0.0; n];
    let mut best_residual = f64::INFINITY;

    loop {
        let j = basis.len() - 1;
        op.apply(basis[j].as_slice(), &mut work);
        let mut w = DVector::from_column_slice(&work);
        if j > 0 {
            let b = betas[j - 1];
            w.axpy(-b, &basis[j - 1], 1.0);
        }
        let a = basis[j].dot(&w);
        w.axpy(-a, &basis[j], 1.0);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                if c != 0.0 {
                    w.axpy(-c, b, 1.0);
                }
            }
        }
        alphas.push(a);
        let beta = w.norm();

        let dim = basis.len();
        let done_growing = dim >= cap;
        if dim >= next_check || done_growing || beta <= 1e-12 {
            // Ritz pairs of the current tridiagonal.
            let mut t = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                t[(i, i)] = alphas[i];
                if i + 1 < dim {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = t.symmetric_eigen();
            let theta: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let order = sort_order(&theta, mode);
            if dim >= k {
                let selected: Vec<usize> = order[..k].to_vec();
                let mut max_res = 0.0_f64;
                for &s in &selected {
                    let est = beta * eig.eigenvectors[(dim - 1, s)].abs();
                    let scale = theta[s].abs().max(1.0);
                    max_res = max_res.max(est / scale);
                }
                best_residual = best_residual.min(max_res);
                if max_res <= opts.tol || done_growing || beta <= 1e-12 {
                    // Assemble Ritz vectors.
                    let mut vectors = DMatrix::zeros(n, k);
                    let mut values = Vec::with_capacity(k);
                    for (col, &s) in selected.iter().enumerate() {
                        let mut v = DVector::zeros(n);
                        for (i, b) in basis.iter().enumerate() {
                            v.axpy(eig.eigenvectors[(i, s)], b, 1.0);
                        }
                        let norm = v.norm();
                        if norm > 0.0 {
                            v /= norm;
                        }
                        vectors.set_column(col, &v);
                        values.push(theta[s]);
                    }
                    // Verify true residuals before returning.
                    let mut achieved = 0.0_f64;
                    for col in 0..k {
                        op.apply(vectors.column(col).as_slice(), &mut work);
                        let mut r = DVector::from_column_slice(&work);
                        r.axpy(-values[col], &vectors.column(col).clone_owned(), 1.0);
                        achieved = achieved.max(r.norm() / values[col].abs().max(1.0));
                    }
                    if achieved <= opts.tol.max(1e-6) || done_growing || beta <= 1e-12 {
                        return Ok(EigenBasis { values, vectors });
                    }
                }
            }
            next_check = (dim + 10).min(cap);
            if done_growing && dim >= cap {
                return Err(NetcropError::Solver {
                    residual: best_residual,
                });
            }
        }

        if beta <= 1e-12 {
            // Invariant subspace found; continue with a fresh direction.
            match fresh_direction(n, &mut stream, &basis) {
                Some(v) => {
                    betas.push(0.0);
                    basis.push(v);
                }
                None => {
                    return Err(NetcropError::Solver {
                        residual: best_residual,
                    })
                }
            }
        } else {
            betas.push(beta);
            basis.push(w / beta);
        }
    }
}
