//! Stitching of unidentifiable parameters across subnetworks: permutation
//! matching of community labels and orthogonal / generalized Procrustes
//! alignment of embeddings.

use nalgebra::DMatrix;

use crate::error::{NetcropError, Result};
use crate::spectral::Embedding;

/// Guard on the factorial search of [`match_bf`].
pub const BF_GUARD: usize = 8;

/// Bijection on [0, K): `map[old_label] = new_label`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationMap {
    pub map: Vec<usize>,
}

impl PermutationMap {
    pub fn identity(k: usize) -> Self {
        Self {
            map: (0..k).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.map.len()
    }

    pub fn is_bijection(&self) -> bool {
        let k = self.map.len();
        let mut seen = vec![false; k];
        for &t in &self.map {
            if t >= k || seen[t] {
                return false;
            }
            seen[t] = true;
        }
        true
    }

    pub fn apply(&self, labels: &mut [usize]) {
        for l in labels {
            *l = self.map[*l];
        }
    }
}

fn confusion(c1: &[usize], c2: &[usize], k: usize) -> DMatrix<usize> {
    let mut m = DMatrix::zeros(k, k);
    for (&a, &b) in c1.iter().zip(c2) {
        m[(a, b)] += 1;
    }
    m
}

fn mismatches(conf: &DMatrix<usize>, perm: &[usize], n: usize) -> usize {
    let agree: usize = perm.iter().enumerate().map(|(a, &b)| conf[(a, b)]).sum();
    n - agree
}

/// Exhaustive search over permutations of C1's labels minimizing the Hamming
/// mismatch against C2. Ties break toward the lexicographically smallest
/// permutation. Guarded at K <= 8.
pub fn match_bf(c1: &[usize], c2: &[usize], k: usize) -> Result<PermutationMap> {
    if c1.len() != c2.len() {
        return Err(NetcropError::Domain("label vectors differ in length".into()));
    }
    if k > BF_GUARD {
        return Err(NetcropError::Complexity { k, guard: BF_GUARD });
    }
    let conf = confusion(c1, c2, k);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_cost = mismatches(&conf, &perm, c1.len());
    // permutations visited in lexicographic order; strict < keeps the first
    while next_permutation(&mut perm) {
        let cost = mismatches(&conf, &perm, c1.len());
        if cost < best_cost {
            best_cost = cost;
            best = perm.clone();
        }
    }
    Ok(PermutationMap { map: best })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Greedy confusion-matrix peeling: repeatedly fix the pairing with the
/// highest count (ties toward lower row, then lower column) and strike its
/// row and column. Always returns a full bijection.
pub fn match_greedy(c1: &[usize], c2: &[usize], k: usize) -> Result<PermutationMap> {
    if c1.len() != c2.len() {
        return Err(NetcropError::Domain("label vectors differ in length".into()));
    }
    let conf = confusion(c1, c2, k);
    let mut row_used = vec![false; k];
    let mut col_used = vec![false; k];
    let mut map = vec![usize::MAX; k];
    for _ in 0..k {
        let mut best: Option<(usize, usize, usize)> = None;
        for i in 0..k {
            if row_used[i] {
                continue;
            }
            for j in 0..k {
                if col_used[j] {
                    continue;
                }
                let v = conf[(i, j)];
                if best.map_or(true, |(bv, _, _)| v > bv) {
                    best = Some((v, i, j));
                }
            }
        }
        let (_, i, j) = best.unwrap();
        map[i] = j;
        row_used[i] = true;
        col_used[j] = true;
    }
    Ok(PermutationMap { map })
}

/// d x d orthogonal matrix; `degenerate` marks a zero cross-product fallback.
#[derive(Debug, Clone)]
pub struct OrthogonalMap {
    pub matrix: DMatrix<f64>,
    pub degenerate: bool,
}

impl OrthogonalMap {
    pub fn d(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Orthogonal W minimizing ||M_from W - M_to||_F, from the SVD of
/// M_from^T M_to.
pub fn procrustes(m_from: &DMatrix<f64>, m_to: &DMatrix<f64>) -> Result<OrthogonalMap> {
    if m_from.shape() != m_to.shape() {
        return Err(NetcropError::Domain("procrustes inputs differ in shape".into()));
    }
    let d = m_from.ncols();
    let cross = m_from.transpose() * m_to;
    if cross.norm() < 1e-14 {
        return Ok(OrthogonalMap {
            matrix: DMatrix::identity(d, d),
            degenerate: true,
        });
    }
    let svd = cross.svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    Ok(OrthogonalMap {
        matrix: u * vt,
        degenerate: false,
    })
}

/// Result of aligning per-subnetwork embeddings against the first one.
#[derive(Debug, Clone)]
pub struct AlignedEmbeddings {
    pub embeddings: Vec<Embedding>,
    pub warnings: Vec<String>,
}

/// Rotates every embedding after the first by the Procrustes map fitted on
/// the leading `overlap` rows against embedding 0.
pub fn align_embeddings(embeddings: &[Embedding], overlap: usize) -> Result<AlignedEmbeddings> {
    if embeddings.is_empty() {
        return Err(NetcropError::Domain("no embeddings to align".into()));
    }
    let d = embeddings[0].d();
    let mut warnings = Vec::new();
    if overlap < d {
        warnings.push(format!(
            "overlap size {overlap} below embedding dimension {d}: alignment may be ill-posed"
        ));
    }
    let standard = embeddings[0].coords.rows(0, overlap).clone_owned();
    let mut out = Vec::with_capacity(embeddings.len());
    out.push(embeddings[0].clone());
    for (q, emb) in embeddings.iter().enumerate().skip(1) {
        if emb.d() != d || emb.coords.nrows() < overlap {
            return Err(NetcropError::Domain(format!(
                "embedding {q} incompatible with overlap alignment"
            )));
        }
        let ov = emb.coords.rows(0, overlap).clone_owned();
        let w = procrustes(&ov, &standard)?;
        if w.degenerate {
            warnings.push(format!("degenerate overlap cross-product for subnetwork {q}"));
        }
        out.push(Embedding {
            coords: &emb.coords * &w.matrix,
        });
    }
    Ok(AlignedEmbeddings {
        embeddings: out,
        warnings,
    })
}

/// Generalized Procrustes for translation-invariant latent positions: each
/// non-standard embedding is centered on its overlap rows, rotated by the
/// overlap-fitted map, then translated so the overlap centroid coincides
/// with that of embedding 0.
pub fn align_latent(embeddings: &[Embedding], overlap: usize) -> Result<AlignedEmbeddings> {
    if embeddings.is_empty() {
        return Err(NetcropError::Domain("no embeddings to align".into()));
    }
    let d = embeddings[0].d();
    let mut warnings = Vec::new();
    if overlap < d {
        warnings.push(format!(
            "overlap size {overlap} below embedding dimension {d}: alignment may be ill-posed"
        ));
    }
    let std_ov = embeddings[0].coords.rows(0, overlap).clone_owned();
    let std_centroid = std_ov.row_mean();
    let std_centered = {
        let mut m = std_ov.clone();
        for mut row in m.row_iter_mut() {
            row -= &std_centroid;
        }
        m
    };
    let mut out = Vec::with_capacity(embeddings.len());
    out.push(embeddings[0].clone());
    for (q, emb) in embeddings.iter().enumerate().skip(1) {
        let ov = emb.coords.rows(0, overlap).clone_owned();
        let centroid = ov.row_mean();
        let mut centered = ov;
        for mut row in centered.row_iter_mut() {
            row -= &centroid;
        }
        let w = procrustes(&centered, &std_centered)?;
        if w.degenerate {
            warnings.push(format!("degenerate overlap cross-product for subnetwork {q}"));
        }
        let mut coords = emb.coords.clone();
        for mut row in coords.row_iter_mut() {
            row -= &centroid;
        }
        coords = coords * &w.matrix;
        for mut row in coords.row_iter_mut() {
            row += &std_centroid;
        }
        out.push(Embedding { coords });
    }
    Ok(AlignedEmbeddings {
        embeddings: out,
        warnings,
    })
}
