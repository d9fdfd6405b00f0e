//! Fitting procedures on top of the eigensolver: spectral clustering,
//! spherical spectral clustering, adjacency spectral embedding, and
//! regularized spectral clustering.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{NetcropError, Result};
use crate::graph::AdjacencyMatrix;
use crate::spectral::eigen::{
    top_eigenpairs, EigenBasis, EigenOptions, OrderingMode, RegularizedLaplacian,
};
use crate::spectral::kmeans::{kmeans, kmedian, KmeansOptions};

/// Per-node community ids in [0, K).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

/// Latent-position coordinates, one row per node.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub coords: DMatrix<f64>,
}

impl Embedding {
    pub fn d(&self) -> usize {
        self.coords.ncols()
    }
}

/// Backend realizing the spherical clustering step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphericalBackend {
    /// k-means on row-normalized eigenvector rows (default).
    Kmeans,
    /// Weiszfeld-based (2,1)-norm k-median.
    Kmedian,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub eigen: EigenOptions,
    pub kmeans: KmeansOptions,
    pub spherical_backend: SphericalBackend,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            eigen: EigenOptions::default(),
            kmeans: KmeansOptions::default(),
            spherical_backend: SphericalBackend::Kmeans,
        }
    }
}

/// Clusters the rows of an eigenvector block (plain k-means).
pub fn cluster_rows(
    rows: &DMatrix<f64>,
    k: usize,
    opts: &FitOptions,
    rng: &mut impl Rng,
) -> Result<CommunityAssignment> {
    let fit = kmeans(rows, k, &opts.kmeans, rng)?;
    Ok(CommunityAssignment {
        labels: fit.labels,
        k,
    })
}

/// Spherical clustering of eigenvector rows: positive-norm rows are
/// normalized and clustered; zero-norm rows get community 0.
pub fn spherical_cluster_rows(
    rows: &DMatrix<f64>,
    k: usize,
    opts: &FitOptions,
    rng: &mut impl Rng,
) -> Result<CommunityAssignment> {
    let n = rows.nrows();
    let d = rows.ncols();
    let mut keep = Vec::new();
    for i in 0..n {
        if rows.row(i).norm() > 0.0 {
            keep.push(i);
        }
    }
    if keep.len() < k {
        return Err(NetcropError::Degenerate(format!(
            "only {} nonzero rows for K = {k}",
            keep.len()
        )));
    }
    let mut normalized = DMatrix::zeros(keep.len(), d);
    for (r, &i) in keep.iter().enumerate() {
        let norm = rows.row(i).norm();
        for t in 0..d {
            normalized[(r, t)] = rows[(i, t)] / norm;
        }
    }
    let fit = match opts.spherical_backend {
        SphericalBackend::Kmeans => kmeans(&normalized, k, &opts.kmeans, rng)?,
        SphericalBackend::Kmedian => kmedian(&normalized, k, &opts.kmeans, rng)?,
    };
    let mut labels = vec![0usize; n];
    for (r, &i) in keep.iter().enumerate() {
        labels[i] = fit.labels[r];
    }
    Ok(CommunityAssignment { labels, k })
}

/// Spectral clustering: k-means on the leading-K eigenvector rows of A,
/// eigenvalues ordered by absolute value.
pub fn spectral_clustering(
    a: &AdjacencyMatrix,
    k: usize,
    opts: &FitOptions,
    rng: &mut impl Rng,
) -> Result<CommunityAssignment> {
    let basis = top_eigenpairs(a, k, OrderingMode::AbsoluteDesc, &opts.eigen)?;
    cluster_rows(&basis.vectors, k, opts, rng)
}

/// Spherical spectral clustering for degree-heterogeneous networks.
pub fn spherical_spectral_clustering(
    a: &AdjacencyMatrix,
    k: usize,
    opts: &FitOptions,
    rng: &mut impl Rng,
) -> Result<CommunityAssignment> {
    let basis = top_eigenpairs(a, k, OrderingMode::AbsoluteDesc, &opts.eigen)?;
    spherical_cluster_rows(&basis.vectors, k, opts, rng)
}

/// Truncates an algebraic-descending basis to `d` columns and forms
/// U Lambda^{1/2}, clamping negative retained eigenvalues to zero.
pub fn ase_from_basis(basis: &EigenBasis, d: usize) -> Result<Embedding> {
    if d == 0 || d > basis.k() {
        return Err(NetcropError::Domain(format!(
            "d = {d} out of range for basis width {}",
            basis.k()
        )));
    }
    let n = basis.vectors.nrows();
    let mut coords = DMatrix::zeros(n, d);
    for col in 0..d {
        let scale = basis.values[col].max(0.0).sqrt();
        for i in 0..n {
            coords[(i, col)] = basis.vectors[(i, col)] * scale;
        }
    }
    Ok(Embedding { coords })
}

/// Adjacency spectral embedding at dimension d.
pub fn ase(a: &AdjacencyMatrix, d: usize, opts: &EigenOptions) -> Result<Embedding> {
    if d == 0 {
        return Err(NetcropError::Domain("d must be >= 1".into()));
    }
    let basis = top_eigenpairs(a, d, OrderingMode::AlgebraicDesc, opts)?;
    ase_from_basis(&basis, d)
}

/// Dense-matrix variant used when embedding an exact probability matrix.
pub fn ase_dense(p: &DMatrix<f64>, d: usize, opts: &EigenOptions) -> Result<Embedding> {
    if d == 0 {
        return Err(NetcropError::Domain("d must be >= 1".into()));
    }
    let basis = top_eigenpairs(p, d, OrderingMode::AlgebraicDesc, opts)?;
    ase_from_basis(&basis, d)
}

/// Regularized spectral clustering: row-normalized leading-K eigenvectors of
/// L_tau = D_tau^{-1/2} A D_tau^{-1/2}, D_tau = D + tau * mean_degree * I.
pub fn regularized_spectral_clustering(
    a: &AdjacencyMatrix,
    k: usize,
    tau: f64,
    opts: &FitOptions,
    rng: &mut impl Rng,
) -> Result<CommunityAssignment> {
    let basis = rsc_basis(a, k, tau, &opts.eigen)?;
    spherical_cluster_rows(&basis.vectors, k, opts, rng)
}

pub fn rsc_basis(
    a: &AdjacencyMatrix,
    k: usize,
    tau: f64,
    opts: &EigenOptions,
) -> Result<EigenBasis> {
    let l = RegularizedLaplacian::new(a, tau)?;
    top_eigenpairs(&l, k, OrderingMode::AbsoluteDesc, opts)
}
