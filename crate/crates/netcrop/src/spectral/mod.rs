//! Eigendecomposition and the four fitting procedures.

pub mod cluster;
pub mod eigen;
pub mod kmeans;

pub use cluster::{
    ase, ase_dense, ase_from_basis, cluster_rows, regularized_spectral_clustering, rsc_basis,
    spectral_clustering, spherical_cluster_rows, spherical_spectral_clustering,
    CommunityAssignment, Embedding, FitOptions, SphericalBackend,
};
pub use eigen::{top_eigenpairs, EigenBasis, EigenOptions, OrderingMode, SymOp};
pub use kmeans::{kmeans, kmedian, Clustering, KmeansOptions};
