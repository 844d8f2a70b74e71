#![allow(dead_code)]

pub mod props;

use giamg::sparse::{coo_to_csr, CooTriplet, SparseMatrix};
use proptest::prelude::*;
use proptest::test_runner::{Config, FileFailurePersistence, RngSeed, TestCaseError, TestRunner};

pub const CASES: u32 = 128;

/// Runs `test` over `CASES` inputs drawn from `strategy` with a fixed seed.
pub fn check<S: Strategy>(
    seed: u64,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases: CASES,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: Some(Box::new(FileFailurePersistence::Off)),
        ..Config::default()
    };
    TestRunner::new(config)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

/// Triplets with repeated positions and explicit zeros mixed in.
pub fn triplets(
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> impl Strategy<Value = (usize, usize, Vec<CooTriplet>)> {
    (rows, cols).prop_flat_map(|(m, n)| {
        let entry = (0..m, 0..n, prop_oneof![3 => -10.0..10.0f64, 1 => Just(0.0)]);
        proptest::collection::vec(entry, 0..(3 * m * n).min(400)).prop_map(move |v| {
            let t = v
                .into_iter()
                .map(|(i, j, x)| CooTriplet::new(i, j, x))
                .collect();
            (m, n, t)
        })
    })
}

pub fn sparse(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = SparseMatrix> {
    triplets(rows, cols).prop_map(|(m, n, t)| coo_to_csr(&t, m, n).unwrap())
}

/// Symmetric, strictly diagonally dominant with positive diagonal.
pub fn spd(n: std::ops::Range<usize>) -> impl Strategy<Value = SparseMatrix> {
    n.prop_flat_map(|n| {
        let edge = (0..n, 0..n, -1.0..-0.01f64);
        proptest::collection::vec(edge, 0..4 * n).prop_map(move |edges| spd_from_edges(n, &edges))
    })
}

pub fn spd_from_edges(n: usize, edges: &[(usize, usize, f64)]) -> SparseMatrix {
    let mut dense = vec![0.0; n * n];
    for &(i, j, w) in edges {
        if i != j {
            dense[i * n + j] += w;
            dense[j * n + i] += w;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| dense[i * n + j].abs()).sum();
        dense[i * n + i] = off + 0.5 + (i % 3) as f64;
    }
    SparseMatrix::from_dense(n, n, &dense).unwrap()
}

pub fn laplace_1d(n: usize) -> SparseMatrix {
    let mut coo = Vec::new();
    for i in 0..n {
        coo.push(CooTriplet::new(i, i, 2.0));
        if i > 0 {
            coo.push(CooTriplet::new(i, i - 1, -1.0));
        }
        if i + 1 < n {
            coo.push(CooTriplet::new(i, i + 1, -1.0));
        }
    }
    coo_to_csr(&coo, n, n).unwrap()
}

pub fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0..1.0f64, n)
}

/// Dense row-major copy built straight from triplets, first value wins.
pub fn dense_first_wins(m: usize, n: usize, t: &[CooTriplet]) -> Vec<f64> {
    let mut d = vec![0.0; m * n];
    let mut seen = vec![false; m * n];
    for e in t {
        let k = e.row * n + e.col;
        if !seen[k] {
            seen[k] = true;
            d[k] = e.value;
        }
    }
    d
}

pub fn dense_matvec(m: usize, n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    (0..m)
        .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
        .collect()
}

pub fn dense_transpose(m: usize, n: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            t[j * m + i] = a[i * n + j];
        }
    }
    t
}

pub fn dense_matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for l in 0..k {
            let ail = a[i * k + l];
            for j in 0..n {
                c[i * n + j] += ail * b[l * n + j];
            }
        }
    }
    c
}

/// Dense Cholesky; `false` if a pivot is not positive.
pub fn is_positive_definite(n: usize, a: &[f64]) -> bool {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    true
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Checks the structural CSR invariants directly on the arrays.
pub fn csr_well_formed(a: &SparseMatrix) -> Result<(), String> {
    let off = a.row_offsets();
    if off.len() != a.nrows() + 1 || off[0] != 0 || off[a.nrows()] != a.nnz() {
        return Err("row offsets do not bracket the entries".into());
    }
    for i in 0..a.nrows() {
        if off[i] > off[i + 1] {
            return Err(format!("row offsets decrease at {i}"));
        }
        let (cols, vals) = a.row(i);
        if cols.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("row {i} columns not strictly increasing"));
        }
        if cols.iter().any(|&c| c >= a.ncols()) {
            return Err(format!("row {i} column out of range"));
        }
        if vals.iter().any(|&v| v == 0.0) {
            return Err(format!("row {i} stores an explicit zero"));
        }
    }
    Ok(())
}

/// Turns a boolean property into a proptest failure with context.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}
