//! Dense LU factorization with partial pivoting, used for the coarsest
//! multigrid level.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    /// Row-major; unit-lower factor below the diagonal, upper factor on and above.
    factors: Vec<f64>,
    /// `perm[k]` is the original row placed at position `k`.
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factors a dense row-major `n x n` matrix.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch {
                op: "dense LU",
                expected: n * n,
                found: a.len(),
            });
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot, pivot_abs) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs == 0.0 || !pivot_abs.is_finite() {
                return Err(Error::Singular { pivot_row: k });
            }
            if pivot != k {
                for j in 0..n {
                    a.swap(k * n + j, pivot * n + j);
                }
                perm.swap(k, pivot);
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / d;
                a[i * n + k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= l * a[k * n + j];
                    }
                }
            }
        }
        Ok(Self {
            n,
            factors: a,
            perm,
        })
    }

    pub fn factor_sparse(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                op: "dense LU (square)",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        Self::factor(a.nrows(), a.to_dense())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` into `x`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        debug_assert_eq!(x.len(), n);
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = b[self.perm[k]];
        }
        for i in 0..n {
            let row = &self.factors[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.factors[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / self.factors[i * n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                op: "dense LU solve",
                expected: self.n,
                found: b.len(),
            });
        }
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        Ok(x)
    }
}

/// Factors the coarsest operator of a hierarchy.
pub fn coarsest_factorize(a: &SparseMatrix) -> Result<DenseLu> {
    DenseLu::factor_sparse(a)
}
