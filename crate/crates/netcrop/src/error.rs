use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Error, Debug)]
pub enum NetcropError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("index out of range: {0}")]
    Range(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigensolver failed to converge: achieved residual {residual:.3e}")]
    Solver { residual: f64 },

    #[error("no feasible (o, s) for n={n}, p_test={p_test}; supply o and s explicitly")]
    Planning { n: usize, p_test: f64 },

    #[error("degenerate graph: {0}")]
    Degenerate(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(
        "brute-force matching guarded at K <= {guard}, got K = {k}; use greedy matching instead"
    )]
    Complexity { k: usize, guard: usize },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NetcropError>;
