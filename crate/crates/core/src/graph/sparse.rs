use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Largest node count for which dense `n × n` operators are materialised.
pub const DENSE_GUARD: usize = 10_000;

/// Compressed sparse row matrix with sorted, duplicate-free columns per row.
///
/// Adjacency matrices built with [`SparseAdjacency::from_edges`] and their
/// symmetric normalisation are symmetric; the random-walk transition is not.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    weights: Vec<f64>,
}

impl SparseAdjacency {
    /// Undirected adjacency from `(i, j, w)` edges. Both directions are
    /// stored; repeated pairs are merged by summing their weights.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries = Vec::with_capacity(edges.len() * 2);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::Data(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Data(format!(
                    "edge ({i}, {j}) has invalid weight {w}"
                )));
            }
            entries.push((i, j, w));
            if i != j {
                entries.push((j, i, w));
            }
        }
        Self::from_entries(n, entries)
    }

    /// General CSR from `(row, col, value)` entries, summing duplicates.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, j, w) in entries {
            if i >= n || j >= n {
                return Err(Error::Data(format!(
                    "entry ({i}, {j}) out of range for {n} nodes"
                )));
            }
            *rows[i].entry(j).or_insert(0.0) += w;
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut weights = Vec::new();
        row_offsets.push(0);
        for row in rows {
            for (j, w) in row {
                col_indices.push(j);
                weights.push(w);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseAdjacency {
            n,
            row_offsets,
            col_indices,
            weights,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_entries(n, (0..n).map(|i| (i, i, 1.0))).expect("in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(column, weight)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| self.weights[span.start + k])
    }

    /// Upper-triangle entries `(i, j, w)` with `i < j`, in row order.
    pub fn upper_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.row(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    /// First pair whose mirror is absent or carries a different weight.
    pub fn asymmetric_pair(&self) -> Option<(usize, usize)> {
        (0..self.n).find_map(|i| {
            self.row(i)
                .find(|&(j, w)| self.get(j, i) != Some(w))
                .map(|(j, _)| (i, j))
        })
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetric_pair().is_none()
    }

    /// Weighted degree of every node.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, w)| w).sum())
            .collect()
    }

    /// Symmetric renormalisation `(D+I)^-1/2 (A+I) (D+I)^-1/2`.
    pub fn normalize(&self) -> Result<SparseAdjacency> {
        if let Some((i, j)) = self.asymmetric_pair() {
            return Err(Error::Data(format!(
                "adjacency is not symmetric at pair ({i}, {j})"
            )));
        }
        let scale: Vec<f64> = self
            .degrees()
            .iter()
            .map(|d| 1.0 / (d + 1.0).sqrt())
            .collect();
        self.with_self_loops(|i, j, w| w * (scale[i] * scale[j]))
    }

    /// Row-stochastic random-walk transition `(D+I)^-1 (A+I)`.
    pub fn random_walk(&self) -> Result<SparseAdjacency> {
        let inv: Vec<f64> = self.degrees().iter().map(|d| 1.0 / (d + 1.0)).collect();
        self.with_self_loops(|i, _, w| w * inv[i])
    }

    fn with_self_loops(&self, f: impl Fn(usize, usize, f64) -> f64) -> Result<SparseAdjacency> {
        let entries = (0..self.n).flat_map(|i| {
            self.row(i)
                .chain(std::iter::once((i, 1.0)))
                .map(move |(j, w)| (i, j, w))
                .collect::<Vec<_>>()
        });
        let plus_i = SparseAdjacency::from_entries(self.n, entries)?;
        let mut out = plus_i.clone();
        for i in 0..self.n {
            for k in plus_i.row_offsets[i]..plus_i.row_offsets[i + 1] {
                out.weights[k] = f(i, plus_i.col_indices[k], plus_i.weights[k]);
            }
        }
        Ok(out)
    }

    /// Sparse-dense product `self · x`.
    pub fn spmm(&self, x: &Tensor) -> Result<Tensor> {
        if x.rows() != self.n {
            return Err(Error::dim("spmm", (self.n, self.n), x.shape()));
        }
        let c = x.cols();
        let mut out = Tensor::zeros(self.n, c);
        for i in 0..self.n {
            let orow = out.row_mut(i);
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let (j, w) = (self.col_indices[k], self.weights[k]);
                for (o, &v) in orow.iter_mut().zip(x.row(j)) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · g`; used for the adjoint of [`Self::spmm`].
    pub fn spmm_transpose(&self, g: &Tensor) -> Tensor {
        let c = g.cols();
        let mut out = Tensor::zeros(self.n, c);
        for i in 0..self.n {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let (j, w) = (self.col_indices[k], self.weights[k]);
                for (o, &v) in out.row_mut(j).iter_mut().zip(g.row(i)) {
                    *o += w * v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Tensor {
        let mut out = Tensor::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                out[(i, j)] = w;
            }
        }
        out
    }

    /// Dense `self^k`, built by `k` sparse products applied to the identity.
    pub fn power_transition(&self, k: usize) -> Result<Tensor> {
        if k == 0 {
            return Err(Error::Usage("power_transition needs k >= 1".into()));
        }
        if self.n > DENSE_GUARD {
            return Err(Error::Capability(format!(
                "dense power of a {}-node operator exceeds the {DENSE_GUARD}-node guard; \
                 apply the operator iteratively with spmm instead",
                self.n
            )));
        }
        let mut acc = Tensor::identity(self.n);
        for _ in 0..k {
            acc = self.spmm(&acc)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn edgeless_graph_normalizes_to_identity() {
        let a = SparseAdjacency::from_edges(3, &[]).unwrap();
        assert_eq!(a.normalize().unwrap().to_dense(), Tensor::identity(3));
    }

    #[test]
    fn single_edge_all_half() {
        let a = SparseAdjacency::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let n = a.normalize().unwrap().to_dense();
        assert!(n.as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn asymmetric_input_names_pair() {
        let a = SparseAdjacency::from_entries(3, [(0, 2, 1.0)]).unwrap();
        let err = a.normalize().unwrap_err().to_string();
        assert!(err.contains("(0, 2)"), "{err}");
    }

    #[test]
    fn duplicates_merge_by_sum() {
        let a = SparseAdjacency::from_edges(2, &[(0, 1, 1.0), (1, 0, 0.5)]).unwrap();
        assert_eq!(a.get(0, 1), Some(1.5));
        assert_eq!(a.get(1, 0), Some(1.5));
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(SparseAdjacency::from_edges(2, &[(0, 1, -1.0)]).is_err());
    }

    #[test]
    fn random_walk_is_row_stochastic() {
        let a = SparseAdjacency::from_edges(4, &[(0, 1, 2.0), (1, 2, 0.5), (2, 3, 1.0)]).unwrap();
        let p = a.random_walk().unwrap().to_dense();
        for s in p.row_sums() {
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn identity_spmm_and_power() {
        let id = SparseAdjacency::identity(3);
        let x = Tensor::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        assert_eq!(id.spmm(&x).unwrap(), x);
        assert_eq!(id.power_transition(5).unwrap(), Tensor::identity(3));
        assert!(id.spmm(&Tensor::zeros(2, 2)).is_err());
        assert!(id.power_transition(0).is_err());
    }

    #[test]
    fn power_one_is_dense() {
        let a = SparseAdjacency::from_edges(3, &[(0, 1, 1.0), (1, 2, 3.0)]).unwrap();
        let norm = a.normalize().unwrap();
        assert_eq!(norm.power_transition(1).unwrap(), norm.to_dense());
    }

    #[test]
    fn power_guard() {
        let big = SparseAdjacency::identity(DENSE_GUARD + 1);
        assert!(matches!(big.power_transition(1), Err(Error::Capability(_))));
    }

    #[test]
    fn stochastic_fixed_point() {
        let a = SparseAdjacency::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 2.0)]).unwrap();
        let p = a.random_walk().unwrap();
        let x = Tensor::from_fn(4, 3, |_, j| j as f64 + 0.5);
        assert!(p.spmm(&x).unwrap().max_abs_diff(&x) < 1e-15);
    }
}
