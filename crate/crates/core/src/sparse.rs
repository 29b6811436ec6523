//! Compressed sparse row matrices with the handful of norms the reductions need.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Real sparse matrix in CSR form. Duplicate keys are summed and explicit
/// zeros are dropped on construction, so every stored value is nonzero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Builds from (row, col, value) triplets. Repeated keys are summed.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut t: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::DimensionMismatch(format!("entry ({i}, {j}) outside {rows}x{cols}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) is not finite")));
            }
            t.push((i, j, v));
        }
        t.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
        for (i, j, v) in t {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);

        let mut row_ptr = vec![0usize; rows + 1];
        for &(i, _, _) in &merged {
            row_ptr[i + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|e| e.1).collect();
        let values = merged.iter().map(|e| e.2).collect();
        Ok(SparseMatrix { rows, cols, row_ptr, col_idx, values })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t).expect("dense entries are in range")
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::from_dense(&DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// (column, value) pairs of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.triplets().map(|(i, j, v)| (j, i, v)))
            .expect("transpose keeps indices in range")
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension");
        DVector::from_fn(self.rows, |i, _| self.row(i).map(|(j, v)| v * x[j]).sum())
    }

    /// Aᵀy without forming the transpose.
    pub fn tr_mul_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.rows, "tr_mul_vec dimension");
        let mut out = DVector::zeros(self.cols);
        for (i, j, v) in self.triplets() {
            out[j] += v * y[i];
        }
        out
    }

    /// Residual c − Ax with compensated dot products, accurate even when
    /// the terms cancel heavily.
    pub fn residual(&self, x: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
        assert_eq!(c.len(), self.rows, "residual dimension");
        DVector::from_fn(self.rows, |i, _| {
            let terms = std::iter::once((c[i], 1.0)).chain(self.row(i).map(|(j, v)| (-v, x[j])));
            crate::linalg::dot2(terms)
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_triplets(self.rows, self.cols, self.triplets().map(|(i, j, v)| (i, j, v * s)))
            .expect("scaling keeps indices")
    }

    /// Largest absolute entry, ‖A‖_max.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest nonzero absolute entry; `None` for the zero matrix.
    pub fn min_abs_nonzero(&self) -> Option<f64> {
        self.values.iter().map(|v| v.abs()).reduce(f64::min)
    }

    /// Induced 1-norm: largest absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for (_, j, v) in self.triplets() {
            sums[j] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Induced ∞-norm: largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row_l1(i)).fold(0.0, f64::max)
    }

    pub fn row_l1(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v.abs()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_integer(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0)
    }

    pub fn first_non_integer(&self) -> Option<(usize, usize, f64)> {
        self.triplets().find(|e| e.2.fract() != 0.0)
    }

    /// First row or column without a stored entry.
    pub fn first_empty_line(&self) -> Option<(&'static str, usize)> {
        if let Some(i) = (0..self.rows).find(|&i| self.row_ptr[i] == self.row_ptr[i + 1]) {
            return Some(("row", i));
        }
        let mut seen = vec![false; self.cols];
        for &j in &self.col_idx {
            seen[j] = true;
        }
        seen.iter().position(|s| !s).map(|j| ("column", j))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    /// Columns selected in the given order, as a dense matrix.
    pub fn dense_columns(&self, cols: &[usize]) -> DMatrix<f64> {
        let mut pos = vec![usize::MAX; self.cols];
        for (k, &j) in cols.iter().enumerate() {
            pos[j] = k;
        }
        let mut m = DMatrix::zeros(self.rows, cols.len());
        for (i, j, v) in self.triplets() {
            if pos[j] != usize::MAX {
                m[(i, pos[j])] = v;
            }
        }
        m
    }

    /// Sorted union support of every column (used to find unused coordinates).
    pub fn column_used(&self) -> Vec<bool> {
        let mut seen = vec![false; self.cols];
        for &j in &self.col_idx {
            seen[j] = true;
        }
        seen
    }
}

/// Squared Euclidean norm with compensated accumulation.
pub fn norm2(v: &DVector<f64>) -> f64 {
    crate::linalg::dot2(v.iter().map(|&x| (x, x))).max(0.0).sqrt()
}
