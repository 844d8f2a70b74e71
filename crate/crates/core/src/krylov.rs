//! Preconditioned conjugate gradients.
//!
//! Convergence is judged on the true residual `b - A x`, recomputed every
//! iteration, relative to `||b||`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, PreconditionerKind, SolveOptions, VcycleWorkspace};
use crate::sparse::{dot, norm2, SparseMatrix};
use crate::timing::{timed, Timings};

pub trait Preconditioner {
    /// `z = M^-1 r`.
    fn apply(&mut self, r: &[f64], z: &mut [f64], timings: &mut Timings);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64], _: &mut Timings) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone)]
pub struct DiagonalPreconditioner {
    inv_diag: Vec<f64>,
}

impl Preconditioner for DiagonalPreconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64], _: &mut Timings) {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * d;
        }
    }
}

/// Jacobi preconditioner; every diagonal entry must be positive.
pub fn diagonal_preconditioner(a: &SparseMatrix) -> Result<DiagonalPreconditioner> {
    let inv_diag = a
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(row, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NonPositiveDiagonal { row, value: d })
            }
        })
        .collect::<Result<_>>()?;
    Ok(DiagonalPreconditioner { inv_diag })
}

/// One V-cycle from a zero guess per application.
#[derive(Debug)]
pub struct GiamgPreconditioner<'h> {
    hierarchy: &'h Hierarchy,
    workspace: VcycleWorkspace,
}

impl<'h> GiamgPreconditioner<'h> {
    pub fn new(hierarchy: &'h Hierarchy) -> Self {
        Self {
            hierarchy,
            workspace: hierarchy.workspace(),
        }
    }
}

impl Preconditioner for GiamgPreconditioner<'_> {
    fn apply(&mut self, r: &[f64], z: &mut [f64], timings: &mut Timings) {
        self.hierarchy.apply(r, z, &mut self.workspace, timings);
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceLog {
    /// `||b - A x_k|| / ||b||` for `k = 0..=iterations`.
    pub relres: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub timings: Timings,
}

impl ConvergenceLog {
    pub fn final_relres(&self) -> f64 {
        self.relres.last().copied().unwrap_or(f64::NAN)
    }

    /// `iter,relres` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,relres\n");
        for (k, r) in self.relres.iter().enumerate() {
            out.push_str(&format!("{k},{r:.17e}\n"));
        }
        out
    }
}

/// Solves `A x = b` by PCG from `x0` (zero when `None`).
pub fn pcg_solve(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &mut dyn Preconditioner,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, ConvergenceLog)> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "pcg (square operator)",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            op: "pcg rhs",
            expected: n,
            found: b.len(),
        });
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                op: "pcg initial guess",
                expected: n,
                found: x0.len(),
            });
        }
    }
    let solve_start = Instant::now();
    let mut log = ConvergenceLog::default();
    let t = &mut log.timings;

    let b_norm = norm2(b);
    if b_norm == 0.0 {
        log.relres.push(0.0);
        log.converged = true;
        t.total_solve = solve_start.elapsed();
        return Ok((vec![0.0; n], log));
    }

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    timed(&mut t.cg_matvec, || a.residual_into(b, &x, &mut r));
    let mut true_r = vec![0.0; n];
    let relres0 = timed(&mut t.cg_dot, || norm2(&r)) / b_norm;
    log.relres.push(relres0);
    if relres0 <= opts.rtol {
        log.converged = true;
        log.timings.total_solve = solve_start.elapsed();
        return Ok((x, log));
    }

    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    precond.apply(&r, &mut z, t);
    let mut rz = timed(&mut t.cg_dot, || dot(&r, &z));
    if !(rz > 0.0) {
        return Err(Error::IndefinitePreconditioner {
            iteration: 0,
            value: rz,
        });
    }
    let mut p = z.clone();

    for k in 1..=opts.max_iters {
        timed(&mut t.cg_matvec, || a.mul_vec_into(&p, &mut q));
        let pq = timed(&mut t.cg_dot, || dot(&p, &q));
        if !(pq > 0.0) {
            return Err(Error::Breakdown {
                iteration: k,
                value: pq,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        timed(&mut t.cg_matvec, || a.residual_into(b, &x, &mut true_r));
        let relres = timed(&mut t.cg_dot, || norm2(&true_r)) / b_norm;
        log.relres.push(relres);
        log.iterations = k;
        if relres <= opts.rtol {
            log.converged = true;
            break;
        }

        precond.apply(&r, &mut z, t);
        let rz_next = timed(&mut t.cg_dot, || dot(&r, &z));
        if !(rz_next > 0.0) {
            return Err(Error::IndefinitePreconditioner {
                iteration: k,
                value: rz_next,
            });
        }
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    log.timings.iterations = log.iterations;
    log.timings.total_solve = solve_start.elapsed();
    Ok((x, log))
}

/// Builds the preconditioner `opts.preconditioner` names and runs PCG.
/// `hierarchy` is required for GIAMG.
pub fn solve_with(
    a: &SparseMatrix,
    b: &[f64],
    hierarchy: Option<&Hierarchy>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, ConvergenceLog)> {
    match opts.preconditioner {
        PreconditionerKind::Giamg => {
            let h = hierarchy.ok_or_else(|| {
                Error::InvalidArgument("GIAMG preconditioning needs a hierarchy".into())
            })?;
            let mut m = GiamgPreconditioner::new(h);
            pcg_solve(a, b, None, &mut m, opts)
        }
        PreconditionerKind::Diagonal => {
            let mut m = diagonal_preconditioner(a)?;
            pcg_solve(a, b, None, &mut m, opts)
        }
        PreconditionerKind::None => pcg_solve(a, b, None, &mut IdentityPreconditioner, opts),
    }
}
