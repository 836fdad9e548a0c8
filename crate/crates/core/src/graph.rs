//! Undirected graph storage and the symmetric normalization used by every
//! propagation step.

use std::collections::BTreeMap;

use crate::error::{CgcError, Result};
use crate::matrix::{DenseMatrix, ROW_CHUNK};
use crate::par::{self, Execution};

/// Symmetric CSR adjacency without stored self-loops.
///
/// Columns within a row are strictly increasing. `values == None` means every
/// stored edge has weight 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Option<Vec<f64>>,
}

impl SparseAdjacency {
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            row_offsets: vec![0; num_nodes + 1],
            col_indices: Vec::new(),
            values: None,
        }
    }

    /// Binary adjacency from an undirected edge list. Both directions are
    /// stored and repeated edges collapse to one.
    pub fn from_undirected_edges(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for (u, v) in edges {
            check_endpoint(u, num_nodes)?;
            check_endpoint(v, num_nodes)?;
            if u == v {
                return Err(CgcError::Structure(format!("self-loop at node {u}")));
            }
            rows[u].push(v);
            rows[v].push(u);
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_indices.extend(r);
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            num_nodes,
            row_offsets,
            col_indices,
            values: None,
        })
    }

    /// Weighted adjacency from `(row, col, weight)` triplets. Duplicate
    /// entries are summed; the result must be symmetric.
    pub fn from_triplets(
        num_nodes: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); num_nodes];
        for (u, v, w) in triplets {
            check_endpoint(u, num_nodes)?;
            check_endpoint(v, num_nodes)?;
            if u == v {
                return Err(CgcError::Structure(format!("self-loop at node {u}")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(CgcError::Structure(format!(
                    "edge ({u}, {v}) has non-positive or non-finite weight {w}"
                )));
            }
            *rows[u].entry(v).or_insert(0.0) += w;
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for r in rows {
            for (c, w) in r {
                col_indices.push(c);
                values.push(w);
            }
            row_offsets.push(col_indices.len());
        }
        let values = if values.iter().all(|&w| w == 1.0) {
            None
        } else {
            Some(values)
        };
        let adj = Self {
            num_nodes,
            row_offsets,
            col_indices,
            values,
        };
        adj.check_symmetric()?;
        Ok(adj)
    }

    /// Validating constructor over raw CSR arrays.
    pub fn from_csr(
        num_nodes: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Option<Vec<f64>>,
    ) -> Result<Self> {
        if row_offsets.len() != num_nodes + 1 {
            return Err(CgcError::DimensionMismatch {
                context: "row_offsets length",
                expected: num_nodes + 1,
                actual: row_offsets.len(),
            });
        }
        if row_offsets[0] != 0 || row_offsets[num_nodes] != col_indices.len() {
            return Err(CgcError::Structure(format!(
                "row_offsets must start at 0 and end at {} (got {} .. {})",
                col_indices.len(),
                row_offsets[0],
                row_offsets[num_nodes]
            )));
        }
        if let Some(v) = &values {
            if v.len() != col_indices.len() {
                return Err(CgcError::DimensionMismatch {
                    context: "adjacency values length",
                    expected: col_indices.len(),
                    actual: v.len(),
                });
            }
        }
        for i in 0..num_nodes {
            let (s, e) = (row_offsets[i], row_offsets[i + 1]);
            if s > e {
                return Err(CgcError::Structure(format!(
                    "row_offsets decrease at row {i}"
                )));
            }
            let row = &col_indices[s..e];
            for (k, &c) in row.iter().enumerate() {
                check_endpoint(c, num_nodes)?;
                if c == i {
                    return Err(CgcError::Structure(format!("self-loop at node {i}")));
                }
                if k > 0 && row[k - 1] >= c {
                    return Err(CgcError::Structure(format!(
                        "row {i} columns not strictly increasing (duplicate or unsorted entry {c})"
                    )));
                }
            }
        }
        let adj = Self {
            num_nodes,
            row_offsets,
            col_indices,
            values,
        };
        adj.check_symmetric()?;
        Ok(adj)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Stored (directed) entries; twice the undirected edge count.
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.nnz() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn weight_at(&self, p: usize) -> f64 {
        self.values.as_ref().map_or(1.0, |v| v[p])
    }

    /// Weighted degree (without the self-loop).
    pub fn degree(&self, i: usize) -> f64 {
        (self.row_offsets[i]..self.row_offsets[i + 1])
            .map(|p| self.weight_at(p))
            .sum()
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let s = self.row_offsets[i];
        self.neighbors(i)
            .binary_search(&j)
            .ok()
            .map(|k| self.weight_at(s + k))
    }

    /// Undirected edges `(u, v)` with `u < v`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.num_nodes {
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[p];
                match self.weight(j, i) {
                    Some(w) if w == self.weight_at(p) => {}
                    _ => return Err(CgcError::NotSymmetric { row: i, col: j }),
                }
            }
        }
        Ok(())
    }

    /// Dense `N x N` copy; only for small graphs.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.num_nodes, self.num_nodes);
        for i in 0..self.num_nodes {
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                out[(i, self.col_indices[p])] = self.weight_at(p);
            }
        }
        out
    }

    /// Unnormalized Laplacian `D - A` as a dense matrix.
    pub fn laplacian_dense(&self) -> DenseMatrix {
        let mut l = self.to_dense().scale(-1.0);
        for i in 0..self.num_nodes {
            l[(i, i)] = self.degree(i);
        }
        l
    }

    fn fingerprint(&self) -> u64 {
        // FNV-1a over the CSR arrays
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(self.num_nodes as u64);
        self.row_offsets.iter().for_each(|&o| eat(o as u64));
        self.col_indices.iter().for_each(|&c| eat(c as u64));
        if let Some(v) = &self.values {
            v.iter().for_each(|w| eat(w.to_bits()));
        }
        h
    }
}

fn check_endpoint(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(CgcError::IndexOutOfRange {
            index: i,
            num_nodes: n,
            context: "edge endpoint".into(),
        });
    }
    Ok(())
}

/// Square CSR operator with explicit values (diagonal included).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            offsets: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    /// `A + I` with entries transformed by `f(weight, i, j)`.
    fn closed_neighborhood(adj: &SparseAdjacency, f: impl Fn(f64, usize, usize) -> f64) -> Self {
        let n = adj.num_nodes();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(adj.nnz() + n);
        let mut vals = Vec::with_capacity(adj.nnz() + n);
        offsets.push(0);
        for i in 0..n {
            let mut diag_done = false;
            for p in adj.row_offsets[i]..adj.row_offsets[i + 1] {
                let j = adj.col_indices[p];
                if !diag_done && j > i {
                    cols.push(i);
                    vals.push(f(1.0, i, i));
                    diag_done = true;
                }
                cols.push(j);
                vals.push(f(adj.weight_at(p), i, j));
            }
            if !diag_done {
                cols.push(i);
                vals.push(f(1.0, i, i));
            }
            offsets.push(cols.len());
        }
        Self {
            n,
            offsets,
            cols,
            vals,
        }
    }

    /// Row-normalized `A + I`: each row averages the closed neighborhood.
    pub fn mean_aggregation(adj: &SparseAdjacency) -> Self {
        let deg: Vec<f64> = (0..adj.num_nodes()).map(|i| adj.degree(i) + 1.0).collect();
        Self::closed_neighborhood(adj, |w, i, _| w / deg[i])
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.offsets[i], self.offsets[i + 1]);
        (&self.cols[s..e], &self.vals[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Sparse-dense product, parallel over fixed row blocks.
    pub fn apply(&self, feats: &DenseMatrix, exec: Execution) -> Result<DenseMatrix> {
        if feats.rows() != self.n {
            return Err(CgcError::DimensionMismatch {
                context: "spmm",
                expected: self.n,
                actual: feats.rows(),
            });
        }
        let d = feats.cols();
        let mut out = DenseMatrix::zeros(self.n, d);
        if d == 0 {
            return Ok(out);
        }
        par::for_each_chunk_mut(exec, out.as_mut_slice(), ROW_CHUNK * d, |ci, chunk| {
            for (local, orow) in chunk.chunks_mut(d).enumerate() {
                let (cols, vals) = self.row(ci * ROW_CHUNK + local);
                for (&j, &v) in cols.iter().zip(vals) {
                    for (o, x) in orow.iter_mut().zip(feats.row(j)) {
                        *o += v * x;
                    }
                }
            }
        });
        Ok(out)
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` for some source adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: SparseOperator,
    source: u64,
}

impl NormalizedAdjacency {
    /// Normalization of the edgeless graph on `n` nodes.
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: SparseOperator::identity(n),
            source: SparseAdjacency::empty(n).fingerprint(),
        }
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.num_nodes()
    }

    /// Fingerprint of the unnormalized adjacency this was built from.
    pub fn source_id(&self) -> u64 {
        self.source
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.matrix.to_dense()
    }
}

/// Symmetric normalization with self-loops.
pub fn normalize(adj: &SparseAdjacency) -> Result<NormalizedAdjacency> {
    adj.check_symmetric()?;
    let deg: Vec<f64> = (0..adj.num_nodes()).map(|i| adj.degree(i) + 1.0).collect();
    // One rounding per entry; the diagonal is exactly w/d̃ so isolated nodes get 1.0.
    let matrix = SparseOperator::closed_neighborhood(adj, |w, i, j| {
        if i == j {
            w / deg[i]
        } else {
            w / (deg[i] * deg[j]).sqrt()
        }
    });
    Ok(NormalizedAdjacency {
        matrix,
        source: adj.fingerprint(),
    })
}

pub fn spmm(adj: &NormalizedAdjacency, feats: &DenseMatrix) -> Result<DenseMatrix> {
    adj.matrix.apply(feats, Execution::default())
}

pub fn spmm_with(
    adj: &NormalizedAdjacency,
    feats: &DenseMatrix,
    exec: Execution,
) -> Result<DenseMatrix> {
    adj.matrix.apply(feats, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> SparseAdjacency {
        SparseAdjacency::from_undirected_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn single_isolated_node_normalizes_to_one() {
        let a = normalize(&SparseAdjacency::empty(1)).unwrap();
        assert_eq!(a.to_dense().as_slice(), &[1.0]);
    }

    #[test]
    fn two_node_edge() {
        let adj = SparseAdjacency::from_undirected_edges(2, [(0, 1)]).unwrap();
        let a = normalize(&adj).unwrap().to_dense();
        for v in a.as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn path_graph_off_diagonal() {
        let a = normalize(&path3()).unwrap();
        assert!((a.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a.get(0, 1) - 0.40825).abs() < 1e-5);
        assert!((a.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.get(0, 2), 0.0);
    }

    #[test]
    fn spmm_hand_example() {
        let adj = SparseAdjacency::from_undirected_edges(2, [(0, 1)]).unwrap();
        let a = normalize(&adj).unwrap();
        let x = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let y = spmm(&a, &x).unwrap();
        assert!(y.max_abs_diff(&DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap()) < 1e-15);
    }

    #[test]
    fn identity_spmm_is_noop() {
        let x = DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        let y = spmm(&NormalizedAdjacency::identity(4), &x).unwrap();
        assert_eq!(y, x);
        let via_empty = normalize(&SparseAdjacency::empty(4)).unwrap();
        assert_eq!(spmm(&via_empty, &x).unwrap(), x);
    }

    #[test]
    fn spmm_dimension_mismatch() {
        let a = normalize(&path3()).unwrap();
        assert!(matches!(
            spmm(&a, &DenseMatrix::zeros(2, 2)),
            Err(CgcError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn asymmetric_triplets_name_the_edge() {
        let err = SparseAdjacency::from_triplets(3, [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)])
            .unwrap_err();
        assert!(matches!(err, CgcError::NotSymmetric { row: 1, col: 2 }));
        let err = SparseAdjacency::from_csr(2, vec![0, 1, 1], vec![1], None).unwrap_err();
        assert!(matches!(err, CgcError::NotSymmetric { row: 0, col: 1 }));
    }

    #[test]
    fn duplicate_triplets_sum() {
        let a = SparseAdjacency::from_triplets(
            2,
            [(0, 1, 1.0), (0, 1, 1.0), (1, 0, 2.0)],
        )
        .unwrap();
        assert_eq!(a.weight(0, 1), Some(2.0));
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn regular_graph_rows_sum_to_one() {
        // 5-cycle: 2-regular, every entry 1/3
        let adj = SparseAdjacency::from_undirected_edges(5, (0..5).map(|i| (i, (i + 1) % 5))).unwrap();
        let a = normalize(&adj).unwrap();
        let ones = DenseMatrix::from_fn(5, 1, |_, _| 1.0);
        let s = spmm(&a, &ones).unwrap();
        for v in s.as_slice() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_aggregation_rows_are_stochastic() {
        let op = SparseOperator::mean_aggregation(&path3());
        for i in 0..3 {
            let (_, vals) = op.row(i);
            assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let l = path3().laplacian_dense();
        for r in l.row_iter() {
            assert_eq!(r.iter().sum::<f64>(), 0.0);
        }
    }
}
