//! Compressed sparse row storage and the kernels the multigrid hierarchy is
//! built from: SpMV, transpose, sparse products and the Galerkin triple
//! product `R * A * P`.
//!
//! Every constructor normalizes to the same canonical form: column indices
//! strictly increasing within a row, and no stored entry whose value is
//! exactly zero.

use std::cell::Cell;

use crate::error::{Error, Result};

thread_local! {
    static CONSTRUCTED: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`SparseMatrix`] values built on the current thread so far.
///
/// Used to check that solving against a finished hierarchy never builds new
/// operators.
pub fn matrices_constructed() -> u64 {
    CONSTRUCTED.with(|c| c.get())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooTriplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl CooTriplet {
    pub fn new(row: usize, col: usize, value: f64) -> Self {
        Self { row, col, value }
    }
}

impl From<(usize, usize, f64)> for CooTriplet {
    fn from((row, col, value): (usize, usize, f64)) -> Self {
        Self { row, col, value }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// How repeated `(row, col)` pairs are merged when building from triplets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Duplicates {
    KeepFirst,
    Sum,
}

impl SparseMatrix {
    fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        CONSTRUCTED.with(|c| c.set(c.get() + 1));
        Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Builds a matrix from raw CSR arrays, validating every invariant.
    ///
    /// Explicit zeros are removed; unsorted or duplicated columns are
    /// rejected rather than repaired.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::InvalidCsr(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidCsr("row_offsets[0] != 0".into()));
        }
        if col_indices.len() != values.len() || row_offsets[nrows] != col_indices.len() {
            return Err(Error::InvalidCsr(format!(
                "row_offsets[nrows] = {}, {} column indices, {} values",
                row_offsets[nrows],
                col_indices.len(),
                values.len()
            )));
        }
        for i in 0..nrows {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            if start > end {
                return Err(Error::InvalidCsr(format!("row_offsets decreases at row {i}")));
            }
            for k in start..end {
                let c = col_indices[k];
                if c >= ncols {
                    return Err(Error::IndexOutOfRange {
                        row: i,
                        col: c,
                        nrows,
                        ncols,
                    });
                }
                if k > start && col_indices[k - 1] >= c {
                    return Err(Error::InvalidCsr(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
        }
        if values.iter().any(|v| *v == 0.0) {
            let mut offsets = Vec::with_capacity(nrows + 1);
            let mut cols = Vec::with_capacity(col_indices.len());
            let mut vals = Vec::with_capacity(values.len());
            offsets.push(0);
            for i in 0..nrows {
                for k in row_offsets[i]..row_offsets[i + 1] {
                    if values[k] != 0.0 {
                        cols.push(col_indices[k]);
                        vals.push(values[k]);
                    }
                }
                offsets.push(cols.len());
            }
            return Ok(Self::from_parts_unchecked(nrows, ncols, offsets, cols, vals));
        }
        Ok(Self::from_parts_unchecked(
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        ))
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts_unchecked(nrows, ncols, vec![0; nrows + 1], Vec::new(), Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    /// Square diagonal matrix; zero diagonal entries are not stored.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for (i, &d) in diag.iter().enumerate() {
            if d != 0.0 {
                cols.push(i);
                vals.push(d);
            }
            offsets.push(cols.len());
        }
        Self::from_parts_unchecked(n, n, offsets, cols, vals)
    }

    /// Builds a matrix from a dense row-major slice, skipping zeros.
    pub fn from_dense(nrows: usize, ncols: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != nrows * ncols {
            return Err(Error::DimensionMismatch {
                op: "from_dense",
                expected: nrows * ncols,
                found: dense.len(),
            });
        }
        let mut offsets = Vec::with_capacity(nrows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for i in 0..nrows {
            for j in 0..ncols {
                let v = dense[i * ncols + j];
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        Ok(Self::from_parts_unchecked(nrows, ncols, offsets, cols, vals))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    /// Stored value at `(i, j)`, or zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn triplets(&self) -> impl Iterator<Item = CooTriplet> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .map(move |(&j, &v)| CooTriplet::new(i, j, v))
        })
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.nrows * self.ncols];
        for t in self.triplets() {
            dense[t.row * self.ncols + t.col] = t.value;
        }
        dense
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A[i,j] - A[j,i]|` over all stored positions.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.triplets()
            .map(|t| (t.value - self.get(t.col, t.row)).abs())
            .fold(0.0, f64::max)
    }

    /// Symmetric up to `rel_tol * max|A|`.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.is_square() && self.max_asymmetry() <= rel_tol * self.max_abs()
    }

    /// `y = A x` into a caller-provided buffer. Lengths are only checked in
    /// debug builds; use [`SparseMatrix::spmv`] for a checked product.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            let mut acc = 0.0;
            for (&j, &v) in self.col_indices[range.clone()].iter().zip(&self.values[range]) {
                acc += v * x[j];
            }
            *yi = acc;
        }
    }

    /// `r = b - A x` into a caller-provided buffer.
    pub fn residual_into(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(b.len(), self.nrows);
        debug_assert_eq!(r.len(), self.nrows);
        for (i, ri) in r.iter_mut().enumerate() {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            let mut acc = 0.0;
            for (&j, &v) in self.col_indices[range.clone()].iter().zip(&self.values[range]) {
                acc += v * x[j];
            }
            *ri = b[i] - acc;
        }
    }

    /// `y += A x`.
    pub fn mul_vec_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            let mut acc = 0.0;
            for (&j, &v) in self.col_indices[range.clone()].iter().zip(&self.values[range]) {
                acc += v * x[j];
            }
            *yi += acc;
        }
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        spmv(self, x)
    }

    pub fn transpose(&self) -> SparseMatrix {
        transpose(self)
    }

    /// Scales every stored value; scaling by zero yields an empty matrix.
    pub fn scaled(&self, factor: f64) -> SparseMatrix {
        if factor == 0.0 {
            return SparseMatrix::zeros(self.nrows, self.ncols);
        }
        Self::from_parts_unchecked(
            self.nrows,
            self.ncols,
            self.row_offsets.clone(),
            self.col_indices.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Average number of stored entries per row.
    pub fn nnz_per_row(&self) -> f64 {
        if self.nrows == 0 {
            0.0
        } else {
            self.nnz() as f64 / self.nrows as f64
        }
    }
}

fn build_from_triplets(
    triplets: &[CooTriplet],
    nrows: usize,
    ncols: usize,
    policy: Duplicates,
) -> Result<SparseMatrix> {
    for t in triplets {
        if t.row >= nrows || t.col >= ncols {
            return Err(Error::IndexOutOfRange {
                row: t.row,
                col: t.col,
                nrows,
                ncols,
            });
        }
    }
    // Bucket by row keeping input order, so a stable sort on column inside
    // each row leaves the first occurrence of a duplicate in front.
    let mut counts = vec![0usize; nrows + 1];
    for t in triplets {
        counts[t.row + 1] += 1;
    }
    for i in 0..nrows {
        counts[i + 1] += counts[i];
    }
    let mut next = counts.clone();
    let mut bucket: Vec<(usize, f64)> = vec![(0, 0.0); triplets.len()];
    for t in triplets {
        bucket[next[t.row]] = (t.col, t.value);
        next[t.row] += 1;
    }

    let mut offsets = Vec::with_capacity(nrows + 1);
    let mut cols = Vec::with_capacity(triplets.len());
    let mut vals = Vec::with_capacity(triplets.len());
    offsets.push(0);
    for i in 0..nrows {
        let row = &mut bucket[counts[i]..counts[i + 1]];
        row.sort_by_key(|&(c, _)| c);
        let mut k = 0;
        while k < row.len() {
            let col = row[k].0;
            let mut value = row[k].1;
            let mut m = k + 1;
            while m < row.len() && row[m].0 == col {
                if policy == Duplicates::Sum {
                    value += row[m].1;
                }
                m += 1;
            }
            if value != 0.0 {
                cols.push(col);
                vals.push(value);
            }
            k = m;
        }
        offsets.push(cols.len());
    }
    Ok(SparseMatrix::from_parts_unchecked(
        nrows, ncols, offsets, cols, vals,
    ))
}

/// Builds a CSR matrix from triplets; a repeated `(row, col)` keeps the value
/// of its first occurrence. Exact zeros are dropped.
pub fn coo_to_csr(triplets: &[CooTriplet], nrows: usize, ncols: usize) -> Result<SparseMatrix> {
    build_from_triplets(triplets, nrows, ncols, Duplicates::KeepFirst)
}

/// Builds a CSR matrix from triplets, accumulating repeated `(row, col)`
/// pairs. This is the finite element assembly constructor.
pub fn coo_to_csr_summed(
    triplets: &[CooTriplet],
    nrows: usize,
    ncols: usize,
) -> Result<SparseMatrix> {
    build_from_triplets(triplets, nrows, ncols, Duplicates::Sum)
}

pub fn spmv(a: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.ncols {
        return Err(Error::DimensionMismatch {
            op: "spmv",
            expected: a.ncols,
            found: x.len(),
        });
    }
    let mut y = vec![0.0; a.nrows];
    a.mul_vec_into(x, &mut y);
    Ok(y)
}

pub fn transpose(a: &SparseMatrix) -> SparseMatrix {
    let mut offsets = vec![0usize; a.ncols + 1];
    for &j in &a.col_indices {
        offsets[j + 1] += 1;
    }
    for j in 0..a.ncols {
        offsets[j + 1] += offsets[j];
    }
    let mut next = offsets.clone();
    let mut cols = vec![0usize; a.nnz()];
    let mut vals = vec![0.0; a.nnz()];
    // Rows are visited in increasing order, so each output row comes out sorted.
    for i in 0..a.nrows {
        let (rc, rv) = a.row(i);
        for (&j, &v) in rc.iter().zip(rv) {
            let slot = next[j];
            cols[slot] = i;
            vals[slot] = v;
            next[j] += 1;
        }
    }
    SparseMatrix::from_parts_unchecked(a.ncols, a.nrows, offsets, cols, vals)
}

/// Sparse product `A * B` (row-by-row accumulation with a dense scatter row).
pub fn matmul(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    if a.ncols != b.nrows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            expected: a.ncols,
            found: b.nrows,
        });
    }
    let n = b.ncols;
    let mut acc = vec![0.0f64; n];
    let mut marker = vec![usize::MAX; n];
    let mut touched: Vec<usize> = Vec::new();

    let mut offsets = Vec::with_capacity(a.nrows + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    offsets.push(0);
    for i in 0..a.nrows {
        touched.clear();
        let (ac, av) = a.row(i);
        for (&k, &aik) in ac.iter().zip(av) {
            let (bc, bv) = b.row(k);
            for (&j, &bkj) in bc.iter().zip(bv) {
                if marker[j] != i {
                    marker[j] = i;
                    acc[j] = aik * bkj;
                    touched.push(j);
                } else {
                    acc[j] += aik * bkj;
                }
            }
        }
        touched.sort_unstable();
        for &j in &touched {
            if acc[j] != 0.0 {
                cols.push(j);
                vals.push(acc[j]);
            }
        }
        offsets.push(cols.len());
    }
    Ok(SparseMatrix::from_parts_unchecked(
        a.nrows, n, offsets, cols, vals,
    ))
}

/// Galerkin coarse operator `R * A * P`, evaluated as `(R * A) * P`.
pub fn galerkin_triple(r: &SparseMatrix, a: &SparseMatrix, p: &SparseMatrix) -> Result<SparseMatrix> {
    if r.ncols != a.nrows {
        return Err(Error::DimensionMismatch {
            op: "galerkin_triple (R * A)",
            expected: a.nrows,
            found: r.ncols,
        });
    }
    if a.ncols != p.nrows {
        return Err(Error::DimensionMismatch {
            op: "galerkin_triple (A * P)",
            expected: a.ncols,
            found: p.nrows,
        });
    }
    let ra = matmul(r, a)?;
    matmul(&ra, p)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
