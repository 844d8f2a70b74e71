//! Jacobi-preconditioned Chebyshev smoothing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{dot, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevOptions {
    pub iterations: usize,
    /// Lower end of the target interval is `lambda_max / lo_factor`.
    pub lo_factor: f64,
    /// Upper end of the target interval is `hi_factor * lambda_max`.
    pub hi_factor: f64,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for ChebyshevOptions {
    fn default() -> Self {
        Self {
            iterations: 2,
            lo_factor: 8.0,
            hi_factor: 1.1,
            power_iters: 30,
            seed: 0,
        }
    }
}

/// Setup-time smoother state for one operator.
#[derive(Debug, Clone)]
pub struct ChebyshevData {
    pub inv_diag: Vec<f64>,
    pub lambda_max: f64,
    pub lo_factor: f64,
    pub hi_factor: f64,
    pub iterations: usize,
}

impl ChebyshevData {
    pub fn new(a: &SparseMatrix, opts: &ChebyshevOptions) -> Result<Self> {
        if opts.iterations == 0 {
            return Err(Error::InvalidArgument("Chebyshev iterations must be >= 1".into()));
        }
        if !(opts.lo_factor > 1.0) || !(opts.hi_factor >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Chebyshev factors lo = {}, hi = {} need lo > 1 and hi >= 1",
                opts.lo_factor, opts.hi_factor
            )));
        }
        let inv_diag = positive_inverse_diagonal(a)?;
        let lambda_max = estimate_lambda_max(a, opts.power_iters, opts.seed)?;
        Ok(Self {
            inv_diag,
            lambda_max,
            lo_factor: opts.lo_factor,
            hi_factor: opts.hi_factor,
            iterations: opts.iterations,
        })
    }

    /// Builds the data for a known spectral bound, skipping estimation.
    pub fn with_lambda_max(
        a: &SparseMatrix,
        lambda_max: f64,
        lo_factor: f64,
        hi_factor: f64,
        iterations: usize,
    ) -> Result<Self> {
        if !(lambda_max > 0.0) || iterations == 0 {
            return Err(Error::InvalidArgument(format!(
                "lambda_max = {lambda_max}, iterations = {iterations}"
            )));
        }
        Ok(Self {
            inv_diag: positive_inverse_diagonal(a)?,
            lambda_max,
            lo_factor,
            hi_factor,
            iterations,
        })
    }

    /// Target eigenvalue interval `[lo, hi]` of `D^-1 A`.
    pub fn interval(&self) -> (f64, f64) {
        (
            self.lambda_max / self.lo_factor,
            self.hi_factor * self.lambda_max,
        )
    }

    /// Error amplification `T_k((theta - mu)/delta) / T_k(theta/delta)` for an
    /// eigencomponent of `D^-1 A` with eigenvalue `mu`.
    pub fn damping_factor(&self, mu: f64) -> f64 {
        let (lo, hi) = self.interval();
        let theta = 0.5 * (hi + lo);
        let delta = 0.5 * (hi - lo);
        if delta == 0.0 {
            return (1.0 - mu / theta).powi(self.iterations as i32);
        }
        chebyshev_t(self.iterations, (theta - mu) / delta) / chebyshev_t(self.iterations, theta / delta)
    }

    pub fn len(&self) -> usize {
        self.inv_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_diag.is_empty()
    }
}

fn chebyshev_t(k: usize, x: f64) -> f64 {
    let (mut t0, mut t1) = (1.0, x);
    if k == 0 {
        return t0;
    }
    for _ in 1..k {
        let t2 = 2.0 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    t1
}

fn positive_inverse_diagonal(a: &SparseMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "diagonal inverse",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(row, d)| {
            if d == 0.0 {
                Err(Error::ZeroDiagonal { row })
            } else if d < 0.0 {
                Err(Error::NonPositiveDiagonal { row, value: d })
            } else {
                Ok(1.0 / d)
            }
        })
        .collect()
}

/// Largest eigenvalue of `D^-1 A` by power iteration on the similar matrix
/// `D^-1/2 A D^-1/2`, started from a seeded random vector. Returns the
/// Rayleigh quotient of the last iterate.
pub fn estimate_lambda_max(a: &SparseMatrix, iters: usize, seed: u64) -> Result<f64> {
    let inv_diag = positive_inverse_diagonal(a)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    let s: Vec<f64> = inv_diag.iter().map(|d| d.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut scaled = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        for i in 0..n {
            scaled[i] = s[i] * v[i];
        }
        a.mul_vec_into(&scaled, &mut w);
        for i in 0..n {
            w[i] *= s[i];
        }
        estimate = dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
    }
    Ok(estimate)
}

/// Scratch vectors for [`chebyshev_smooth_with`].
#[derive(Debug, Clone)]
pub struct ChebyshevWorkspace {
    r: Vec<f64>,
    d: Vec<f64>,
    ad: Vec<f64>,
}

impl ChebyshevWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            r: vec![0.0; n],
            d: vec![0.0; n],
            ad: vec![0.0; n],
        }
    }
}

/// Runs `data.iterations` Chebyshev steps on `A x = b`, updating `x`.
pub fn chebyshev_smooth(
    a: &SparseMatrix,
    data: &ChebyshevData,
    b: &[f64],
    x: &mut [f64],
) -> Result<()> {
    let n = a.nrows();
    for (op, len) in [("chebyshev b", b.len()), ("chebyshev x", x.len()), ("chebyshev data", data.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                op,
                expected: n,
                found: len,
            });
        }
    }
    let mut work = ChebyshevWorkspace::new(n);
    chebyshev_smooth_with(a, data, b, x, false, &mut work);
    Ok(())
}

/// Unchecked smoothing kernel. With `zero_guess` the incoming `x` is
/// treated as zero, saving one matrix-vector product.
pub fn chebyshev_smooth_with(
    a: &SparseMatrix,
    data: &ChebyshevData,
    b: &[f64],
    x: &mut [f64],
    zero_guess: bool,
    work: &mut ChebyshevWorkspace,
) {
    let ChebyshevWorkspace { r, d, ad } = work;
    let inv = &data.inv_diag;
    let (lo, hi) = data.interval();
    let theta = 0.5 * (hi + lo);
    let delta = 0.5 * (hi - lo);

    if zero_guess {
        x.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..r.len() {
            r[i] = inv[i] * b[i];
        }
    } else {
        a.residual_into(b, x, r);
        for i in 0..r.len() {
            r[i] *= inv[i];
        }
    }
    for i in 0..r.len() {
        d[i] = r[i] / theta;
        x[i] += d[i];
    }
    let sigma = if delta > 0.0 { theta / delta } else { f64::INFINITY };
    let mut rho = 1.0 / sigma;
    for _ in 1..data.iterations {
        a.mul_vec_into(d, ad);
        for i in 0..r.len() {
            r[i] -= inv[i] * ad[i];
        }
        if delta > 0.0 {
            let rho_next = 1.0 / (2.0 * sigma - rho);
            let c1 = rho_next * rho;
            let c2 = 2.0 * rho_next / delta;
            for i in 0..r.len() {
                d[i] = c1 * d[i] + c2 * r[i];
                x[i] += d[i];
            }
            rho = rho_next;
        } else {
            for i in 0..r.len() {
                d[i] = r[i] / theta;
                x[i] += d[i];
            }
        }
    }
}
