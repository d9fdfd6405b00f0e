//! Canonical graph representation: symmetric hollow binary adjacency in CSR
//! form, node subsets, and rectangular pair blocks.

use std::io::BufRead;

use crate::error::{NetcropError, Result};

/// Symmetric, hollow, binary adjacency matrix stored as compressed sparse
/// rows with sorted column indices. Immutable after construction.
#[derive(Debug, Clone)]
pub struct AdjacencyMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    degrees: Vec<usize>,
}

impl AdjacencyMatrix {
    /// Builds from an iterator of undirected edges. Duplicates are collapsed
    /// and self-loops dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(NetcropError::Range(format!(
                    "edge ({i}, {j}) exceeds node count {n}"
                )));
            }
            if i == j {
                continue;
            }
            adj[i].push(j as u32);
            adj[j].push(i as u32);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut degrees = Vec::with_capacity(n);
        row_ptr.push(0);
        for nbrs in adj.iter_mut() {
            nbrs.sort_unstable();
            nbrs.dedup();
            col_idx.extend_from_slice(nbrs);
            row_ptr.push(col_idx.len());
            degrees.push(nbrs.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            degrees,
        })
    }

    /// Parses a whitespace-separated edge list. Lines starting with `#` are
    /// ignored. `one_based` shifts external 1-based ids to the internal
    /// 0-based range. `n_override` forces the node count; otherwise
    /// `n = max id + 1`.
    pub fn load_edge_list(
        reader: impl BufRead,
        one_based: bool,
        n_override: Option<usize>,
    ) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut max_id: usize = 0;
        let mut seen_any = false;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut toks = trimmed.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                let tok = tok.ok_or_else(|| NetcropError::Parse {
                    line: lineno + 1,
                    msg: "expected two integer tokens".into(),
                })?;
                let raw: i64 = tok.parse().map_err(|_| NetcropError::Parse {
                    line: lineno + 1,
                    msg: format!("not an integer: {tok:?}"),
                })?;
                let shifted = raw - if one_based { 1 } else { 0 };
                if shifted < 0 {
                    return Err(NetcropError::Range(format!(
                        "negative node id {raw} at line {}",
                        lineno + 1
                    )));
                }
                Ok(shifted as usize)
            };
            let a = parse(toks.next())?;
            let b = parse(toks.next())?;
            if toks.next().is_some() {
                return Err(NetcropError::Parse {
                    line: lineno + 1,
                    msg: "expected exactly two tokens".into(),
                });
            }
            max_id = max_id.max(a).max(b);
            seen_any = true;
            edges.push((a, b));
        }
        let n = n_override.unwrap_or(if seen_any { max_id + 1 } else { 0 });
        Self::from_edges(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.col_idx.len() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Edge density over unordered pairs.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (self.n as f64 * (self.n as f64 - 1.0) / 2.0)
    }

    /// Mean node degree.
    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.col_idx.len() as f64 / self.n as f64
    }

    /// Sorted neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    /// Induced subnetwork on `subset`; entry (a, b) = A[subset[a], subset[b]].
    pub fn induced_subnetwork(&self, subset: &NodeSubset) -> Result<AdjacencyMatrix> {
        subset.validate(self.n)?;
        let mut pos: Vec<u32> = vec![u32::MAX; self.n];
        for (local, &node) in subset.indices().iter().enumerate() {
            pos[node] = local as u32;
        }
        let m = subset.len();
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut col_idx = Vec::new();
        let mut degrees = Vec::with_capacity(m);
        row_ptr.push(0);
        for &node in subset.indices() {
            let start = col_idx.len();
            for &nbr in self.neighbors(node) {
                let p = pos[nbr as usize];
                if p != u32::MAX {
                    col_idx.push(p);
                }
            }
            col_idx[start..].sort_unstable();
            row_ptr.push(col_idx.len());
            degrees.push(col_idx.len() - start);
        }
        Ok(AdjacencyMatrix {
            n: m,
            row_ptr,
            col_idx,
            degrees,
        })
    }

    /// Entries of a rectangular block in row-major order of the subsets.
    pub fn block_entries<'a>(
        &'a self,
        block: &'a DensePairBlock,
    ) -> impl Iterator<Item = (usize, usize, u8)> + 'a {
        block.rows.indices().iter().flat_map(move |&i| {
            block.cols.indices().iter().map(move |&j| {
                let a = u8::from(self.has_edge(i, j));
                (i, j, a)
            })
        })
    }

    /// Sparse-friendly iteration over one block row: local positions (within
    /// `cols`) of the neighbors of `i` that fall in `cols_pos`, where
    /// `cols_pos[node]` is `u32::MAX` for nodes outside the column subset.
    pub fn row_hits_in(&self, i: usize, cols_pos: &[u32], out: &mut Vec<u32>) {
        out.clear();
        for &nbr in self.neighbors(i) {
            let p = cols_pos[nbr as usize];
            if p != u32::MAX {
                out.push(p);
            }
        }
        out.sort_unstable();
    }

    /// Symmetric sparse matvec y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for &j in self.neighbors(i) {
                acc += x[j as usize];
            }
            y[i] = acc;
        }
    }
}

/// Ordered list of distinct node ids within a parent graph of `parent_n`
/// nodes. Order is stable and defines the row order of extracted submatrices
/// and embeddings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSubset {
    indices: Vec<usize>,
    parent_n: usize,
}

impl NodeSubset {
    pub fn new(indices: Vec<usize>, parent_n: usize) -> Result<Self> {
        let s = Self { indices, parent_n };
        s.validate(parent_n)?;
        Ok(s)
    }

    pub fn all(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            parent_n: n,
        }
    }

    fn validate(&self, parent_n: usize) -> Result<()> {
        let mut seen = vec![false; parent_n];
        for &i in &self.indices {
            if i >= parent_n {
                return Err(NetcropError::Range(format!(
                    "subset index {i} out of range for n={parent_n}"
                )));
            }
            if seen[i] {
                return Err(NetcropError::Range(format!("duplicate subset index {i}")));
            }
            seen[i] = true;
        }
        Ok(())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn parent_n(&self) -> usize {
        self.parent_n
    }

    /// Union preserving `self` order first, then `other`; inputs must be
    /// disjoint.
    pub fn union(&self, other: &NodeSubset) -> Result<NodeSubset> {
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        NodeSubset::new(indices, self.parent_n)
    }
}

/// A rectangular block of node pairs rows × cols; for test blocks the two
/// subsets are disjoint.
#[derive(Debug, Clone)]
pub struct DensePairBlock {
    pub rows: NodeSubset,
    pub cols: NodeSubset,
}

impl DensePairBlock {
    pub fn new(rows: NodeSubset, cols: NodeSubset) -> Self {
        Self { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn complete(n: usize) -> AdjacencyMatrix {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        AdjacencyMatrix::from_edges(n, edges).unwrap()
    }

    #[test]
    fn load_basic() {
        let a = AdjacencyMatrix::load_edge_list(Cursor::new("0 1\n1 2"), false, None).unwrap();
        assert_eq!(a.n(), 3);
        assert!(a.has_edge(0, 1) && a.has_edge(1, 0));
        assert!(a.has_edge(1, 2));
        assert!(!a.has_edge(0, 2));
        assert_eq!(a.degrees(), &[1, 2, 1]);
    }

    #[test]
    fn load_collapses_dups_and_loops() {
        let a = AdjacencyMatrix::load_edge_list(Cursor::new("1 2\n2 1\n1 1"), false, None).unwrap();
        assert_eq!(a.n(), 3);
        assert_eq!(a.edge_count(), 1);
        assert!(a.has_edge(1, 2));
        assert!(!a.has_edge(1, 1));
    }

    #[test]
    fn load_one_based_and_comments() {
        let a = AdjacencyMatrix::load_edge_list(Cursor::new("# header\n1 2\n2 3\n"), true, None)
            .unwrap();
        assert_eq!(a.n(), 3);
        assert!(a.has_edge(0, 1));
        assert!(a.has_edge(1, 2));
    }

    #[test]
    fn load_malformed_reports_line() {
        let err =
            AdjacencyMatrix::load_edge_list(Cursor::new("0 1\nx 2"), false, None).unwrap_err();
        match err {
            NetcropError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_negative_id_is_range_error() {
        let err =
            AdjacencyMatrix::load_edge_list(Cursor::new("0 -1\n"), false, None).unwrap_err();
        assert!(matches!(err, NetcropError::Range(_)));
    }

    #[test]
    fn induced_clique_restriction() {
        let k4 = complete(4);
        let s = NodeSubset::new(vec![0, 1], 4).unwrap();
        let k2 = k4.induced_subnetwork(&s).unwrap();
        assert_eq!(k2.n(), 2);
        assert!(k2.has_edge(0, 1));
    }

    #[test]
    fn induced_edgeless() {
        let a = AdjacencyMatrix::from_edges(6, std::iter::empty()).unwrap();
        let s = NodeSubset::new(vec![5, 0, 3], 6).unwrap();
        let sub = a.induced_subnetwork(&s).unwrap();
        assert_eq!(sub.n(), 3);
        assert_eq!(sub.edge_count(), 0);
    }

    #[test]
    fn induced_matches_brute_force() {
        // random 10-node graph vs brute-force re-indexing of all pairs
        let mut edges = Vec::new();
        let mut state = 12345u64;
        for i in 0..10usize {
            for j in i + 1..10 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if state >> 33 & 1 == 1 {
                    edges.push((i, j));
                }
            }
        }
        let a = AdjacencyMatrix::from_edges(10, edges.iter().copied()).unwrap();
        let s = NodeSubset::new(vec![7, 2, 9, 4], 10).unwrap();
        let sub = a.induced_subnetwork(&s).unwrap();
        for (la, &ga) in s.indices().iter().enumerate() {
            for (lb, &gb) in s.indices().iter().enumerate() {
                assert_eq!(sub.has_edge(la, lb), a.has_edge(ga, gb));
            }
        }
    }

    #[test]
    fn induced_all_nodes_identity() {
        let a = complete(5);
        let sub = a.induced_subnetwork(&NodeSubset::all(5)).unwrap();
        assert_eq!(sub.n(), a.n());
        assert_eq!(sub.edge_count(), a.edge_count());
    }

    #[test]
    fn block_entries_counts() {
        let a = AdjacencyMatrix::from_edges(4, [(0, 1)]).unwrap();
        let block = DensePairBlock::new(
            NodeSubset::new(vec![0], 4).unwrap(),
            NodeSubset::new(vec![1], 4).unwrap(),
        );
        let entries: Vec<_> = a.block_entries(&block).collect();
        assert_eq!(entries, vec![(0, 1, 1)]);

        let empty = AdjacencyMatrix::from_edges(5, std::iter::empty()).unwrap();
        let block = DensePairBlock::new(
            NodeSubset::new(vec![0, 1], 5).unwrap(),
            NodeSubset::new(vec![2, 3, 4], 5).unwrap(),
        );
        let zeros: Vec<_> = empty.block_entries(&block).collect();
        assert_eq!(zeros.len(), 6);
        assert!(zeros.iter().all(|&(_, _, v)| v == 0));
    }

    #[test]
    fn block_entries_sum_matches_brute_force() {
        let mut edges = Vec::new();
        let mut state = 999u64;
        for i in 0..12usize {
            for j in i + 1..12 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if state >> 34 & 1 == 1 {
                    edges.push((i, j));
                }
            }
        }
        let a = AdjacencyMatrix::from_edges(12, edges.iter().copied()).unwrap();
        let rows = NodeSubset::new(vec![0, 2, 4, 6, 8], 12).unwrap();
        let cols = NodeSubset::new(vec![1, 3, 5, 7, 9], 12).unwrap();
        let block = DensePairBlock::new(rows.clone(), cols.clone());
        let total: usize = a.block_entries(&block).map(|(_, _, v)| v as usize).sum();
        let brute: usize = rows
            .indices()
            .iter()
            .flat_map(|&i| cols.indices().iter().map(move |&j| (i, j)))
            .filter(|&(i, j)| {
                edges.contains(&(i.min(j), i.max(j)))
            })
            .count();
        assert_eq!(total, brute);
    }

    #[test]
    fn subset_rejects_bad_indices() {
        assert!(NodeSubset::new(vec![0, 3], 3).is_err());
        assert!(NodeSubset::new(vec![1, 1], 3).is_err());
    }
}
