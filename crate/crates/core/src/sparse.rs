//! Compressed sparse row storage.
//!
//! A [`SparseMatrix`] is always canonical: column indices strictly increase
//! within each row and no explicit zeros are stored.

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::{axpy, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Validates raw CSR arrays. Explicit zeros are dropped; anything else
    /// non-canonical is rejected.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 {
            return Err(Error::mismatch("row_offsets length", rows + 1, row_offsets.len()));
        }
        if col_indices.len() != values.len() {
            return Err(Error::mismatch("col_indices length", values.len(), col_indices.len()));
        }
        if row_offsets[0] != 0 || row_offsets[rows] != values.len() {
            return Err(Error::InvalidArgument(
                "row_offsets must start at 0 and end at the number of stored values".into(),
            ));
        }
        for i in 0..rows {
            let (s, e) = (row_offsets[i], row_offsets[i + 1]);
            if s > e {
                return Err(Error::InvalidArgument(format!("row_offsets decrease at row {i}")));
            }
            let idx = &col_indices[s..e];
            if idx.iter().any(|&j| j >= cols) {
                return Err(Error::InvalidArgument(format!("column index out of range in row {i}")));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "column indices not strictly increasing in row {i}"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite stored value".into()));
        }
        let mut m = Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        };
        if m.values.iter().any(|v| v.is_zero()) {
            m = m.filter(|_, _, v| !v.is_zero());
        }
        Ok(m)
    }

    /// Builds from per-row `(column, value)` lists in any order. Zeros are
    /// dropped; a repeated column within a row is an error.
    pub fn from_row_entries(cols: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let mut b = CsrBuilder::new(cols);
        for (i, mut r) in rows.into_iter().enumerate() {
            r.sort_by_key(|&(j, _)| j);
            if let Some(w) = r.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate column {} in row {i}",
                    w[0].0
                )));
            }
            if let Some(&(j, _)) = r.iter().find(|&&(j, _)| j >= cols) {
                return Err(Error::mismatch("column index bound", cols, j));
            }
            b.push_sorted_row(r.into_iter());
        }
        Ok(b.finish())
    }

    pub fn from_dense(d: &DenseMatrix<T>) -> Self {
        let mut b = CsrBuilder::new(d.cols());
        for i in 0..d.rows() {
            b.push_sorted_row(d.row(i).iter().copied().enumerate());
        }
        b.finish()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    #[inline]
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (idx, vals) = self.row(i);
        match idx.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            let r = d.row_mut(i);
            for (&j, &v) in idx.iter().zip(vals) {
                r[j] = v;
            }
        }
        d
    }

    /// CSR of the transpose (equivalently, CSC of `self`).
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                let p = next[j];
                col_indices[p] = i;
                values[p] = v;
                next[j] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Keeps stored entries for which `keep(row, col, value)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize, T) -> bool) -> Self {
        let mut b = CsrBuilder::new(self.cols);
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            let kept: Vec<(usize, T)> = idx
                .iter()
                .zip(vals)
                .filter(|&(&j, &v)| keep(i, j, v))
                .map(|(&j, &v)| (j, v))
                .collect();
            b.push_sorted_row(kept.into_iter());
        }
        b.finish()
    }

    /// Replaces each stored value `v` at column `j` by `f(j, v)`; results
    /// equal to zero are dropped.
    pub fn map_by_column(&self, f: impl Fn(usize, T) -> T) -> Self {
        let mut b = CsrBuilder::new(self.cols);
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            b.push_sorted_row(idx.iter().zip(vals).map(|(&j, &v)| (j, f(j, v))));
        }
        b.finish()
    }

    /// Scales every nonempty row to unit Euclidean norm.
    pub fn l2_normalize_rows(&self) -> Self {
        let mut out = self.clone();
        for i in 0..out.rows {
            let (s, e) = (out.row_offsets[i], out.row_offsets[i + 1]);
            let row = &mut out.values[s..e];
            let scale = row.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if scale.is_zero() {
                continue;
            }
            let norm = scale * row.iter().map(|&v| (v / scale) * (v / scale)).sum::<T>().sqrt();
            row.iter_mut().for_each(|v| *v /= norm);
        }
        out
    }

    /// Rows in the given order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut b = CsrBuilder::new(self.cols);
        for &i in rows {
            let (idx, vals) = self.row(i);
            b.push_sorted_row(idx.iter().copied().zip(vals.iter().copied()));
        }
        b.finish()
    }

    /// Columns `start..end`, re-indexed from zero.
    pub fn column_slice(&self, start: usize, end: usize) -> Self {
        let mut b = CsrBuilder::new(end - start);
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            let lo = idx.partition_point(|&j| j < start);
            let hi = idx.partition_point(|&j| j < end);
            b.push_sorted_row(idx[lo..hi].iter().map(|&j| j - start).zip(vals[lo..hi].iter().copied()));
        }
        b.finish()
    }

    /// Number of stored entries per column.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.cols];
        for &j in &self.col_indices {
            c[j] += 1;
        }
        c
    }

    /// Returns the same entries with a wider column range.
    pub fn widen(mut self, cols: usize) -> Self {
        assert!(cols >= self.cols, "cannot narrow a sparse matrix");
        self.cols = cols;
        self
    }

    /// `self * rhs` with a dense right-hand side.
    pub fn mul_dense(&self, rhs: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if self.cols != rhs.rows() {
            return Err(Error::mismatch("sparse-dense product inner dimension", self.cols, rhs.rows()));
        }
        let width = rhs.cols();
        let mut out = DenseMatrix::zeros(self.rows, width);
        if width == 0 {
            return Ok(out);
        }
        out.values_mut()
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, orow)| {
                let (idx, vals) = self.row(i);
                for (&k, &v) in idx.iter().zip(vals) {
                    axpy(v, rhs.row(k), orow);
                }
            });
        Ok(out)
    }

    /// `self * rhs` with a sparse right-hand side, accumulated densely.
    pub fn mul_sparse_to_dense(&self, rhs: &SparseMatrix<T>) -> Result<DenseMatrix<T>> {
        if self.cols != rhs.rows {
            return Err(Error::mismatch("sparse-sparse product inner dimension", self.cols, rhs.rows));
        }
        let width = rhs.cols;
        let mut out = DenseMatrix::zeros(self.rows, width);
        if width == 0 {
            return Ok(out);
        }
        out.values_mut()
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, orow)| {
                let (idx, vals) = self.row(i);
                for (&k, &v) in idx.iter().zip(vals) {
                    let (ridx, rvals) = rhs.row(k);
                    for (&j, &w) in ridx.iter().zip(rvals) {
                        orow[j] += v * w;
                    }
                }
            });
        Ok(out)
    }

    /// Row `i` times `rhs`, accumulated into `out` (length `rhs.cols()`).
    pub fn row_times_dense_into(&self, i: usize, rhs: &DenseMatrix<T>, out: &mut [T]) {
        let (idx, vals) = self.row(i);
        for (&k, &v) in idx.iter().zip(vals) {
            axpy(v, rhs.row(k), out);
        }
    }

    pub fn cast<U: Scalar>(&self) -> SparseMatrix<U> {
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Appends canonical rows one at a time.
#[derive(Debug)]
pub struct CsrBuilder<T> {
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrBuilder<T> {
    pub fn new(cols: usize) -> Self {
        Self {
            cols,
            row_offsets: vec![0],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Pushes a row whose column indices are strictly increasing and `< cols`.
    /// Zero values are skipped.
    pub fn push_sorted_row(&mut self, entries: impl Iterator<Item = (usize, T)>) {
        for (j, v) in entries {
            debug_assert!(j < self.cols);
            debug_assert!(self.col_indices.len() == *self.row_offsets.last().unwrap()
                || *self.col_indices.last().unwrap() < j);
            if !v.is_zero() {
                self.col_indices.push(j);
                self.values.push(v);
            }
        }
        self.row_offsets.push(self.values.len());
    }

    pub fn finish(self) -> SparseMatrix<T> {
        SparseMatrix {
            rows: self.row_offsets.len() - 1,
            cols: self.cols,
            row_offsets: self.row_offsets,
            col_indices: self.col_indices,
            values: self.values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> SparseMatrix<f64> {
        SparseMatrix::from_row_entries(3, vec![vec![(2, 0.5), (0, 1.0)], vec![], vec![(1, 2.0)]]).unwrap()
    }

    #[test]
    fn canonical_from_unsorted_rows() {
        let m = example();
        assert_eq!(m.row_offsets(), &[0, 2, 2, 3]);
        assert_eq!(m.col_indices(), &[0, 2, 1]);
        assert_eq!(m.get(0, 2), 0.5);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn explicit_zeros_dropped() {
        let m = SparseMatrix::from_csr(1, 3, vec![0, 2], vec![0, 1], vec![0.0, 2.0]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.col_indices(), &[1]);
    }

    #[test]
    fn bad_csr_rejected() {
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 2.0]).is_err());
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
        assert!(SparseMatrix::from_csr(2, 3, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(SparseMatrix::<f64>::from_row_entries(3, vec![vec![(1, 1.0), (1, 2.0)]]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let m = SparseMatrix::<f64>::from_row_entries(3, vec![vec![(0, 3.0), (2, 4.0)], vec![(1, 5.0)], vec![]])
            .unwrap()
            .l2_normalize_rows();
        assert!((m.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((m.get(0, 2) - 0.8).abs() < 1e-15);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.row_nnz(2), 0);
    }

    #[test]
    fn products_match_dense() {
        let a = example();
        let d = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let expect = a.to_dense().matmul(&d).unwrap();
        assert_eq!(a.mul_dense(&d).unwrap(), expect);
        assert_eq!(a.mul_sparse_to_dense(&SparseMatrix::from_dense(&d)).unwrap(), expect);
    }

    fn arb_sparse() -> impl Strategy<Value = SparseMatrix<f64>> {
        (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
            proptest::collection::vec(
                proptest::collection::vec(prop_oneof![Just(0.0), -5.0..5.0f64], c),
                r,
            )
            .prop_map(move |rows| SparseMatrix::from_dense(&DenseMatrix::from_rows(&rows).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn transpose_is_involution(m in arb_sparse()) {
            prop_assert_eq!(m.transpose().transpose(), m.clone());
            prop_assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
        }

        #[test]
        fn normalization_idempotent(m in arb_sparse()) {
            let once = m.l2_normalize_rows();
            let twice = once.l2_normalize_rows();
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for i in 0..once.rows() {
                let n: f64 = once.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt();
                if once.row_nnz(i) > 0 {
                    prop_assert!((n - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
