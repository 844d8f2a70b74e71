//! Hierarchical modal basis on `[-1, 1]`: two vertex modes plus bubble modes
//! built from `P^{1,1}` Jacobi polynomials, and Gauss-Legendre quadrature.

use crate::error::{Error, Result};

/// Jacobi polynomial `P_n^{alpha,beta}(a)` by the three-term recurrence.
pub fn jacobi_poly(n: usize, alpha: f64, beta: f64, a: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut p_prev = 1.0;
    let mut p = 0.5 * ((alpha - beta) + (alpha + beta + 2.0) * a);
    for k in 2..=n {
        let k = k as f64;
        let s = 2.0 * k + alpha + beta;
        let c0 = 2.0 * k * (k + alpha + beta) * (s - 2.0);
        let c1 = (s - 1.0) * (s * (s - 2.0) * a + alpha * alpha - beta * beta);
        let c2 = 2.0 * (k + alpha - 1.0) * (k + beta - 1.0) * s;
        let next = (c1 * p - c2 * p_prev) / c0;
        p_prev = p;
        p = next;
    }
    p
}

/// `d/da P_n^{alpha,beta}(a)`.
pub fn jacobi_poly_derivative(n: usize, alpha: f64, beta: f64, a: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    0.5 * (n as f64 + alpha + beta + 1.0) * jacobi_poly(n - 1, alpha + 1.0, beta + 1.0, a)
}

/// One-dimensional modal basis of a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModalBasis1D {
    order: usize,
}

impl ModalBasis1D {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("basis order must be at least 1".into()));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_modes(&self) -> usize {
        self.order + 1
    }

    pub fn value(&self, mode: usize, a: f64) -> Result<f64> {
        phi_1d(mode, self.order, a)
    }
}

/// Mode `i` of the order-`p` modal basis at `a`.
pub fn phi_1d(i: usize, p: usize, a: f64) -> Result<f64> {
    if i > p {
        return Err(Error::InvalidArgument(format!(
            "mode {i} exceeds basis order {p}"
        )));
    }
    Ok(mode_value(i, a))
}

pub(crate) fn mode_value(i: usize, a: f64) -> f64 {
    match i {
        0 => 0.5 * (1.0 - a),
        1 => 0.5 * (1.0 + a),
        _ => 0.25 * (1.0 - a) * (1.0 + a) * jacobi_poly(i - 2, 1.0, 1.0, a),
    }
}

pub(crate) fn mode_derivative(i: usize, a: f64) -> f64 {
    match i {
        0 => -0.5,
        1 => 0.5,
        _ => {
            let n = i - 2;
            -0.5 * a * jacobi_poly(n, 1.0, 1.0, a)
                + 0.25 * (1.0 - a * a) * jacobi_poly_derivative(n, 1.0, 1.0, a)
        }
    }
}

/// Position of the tensor mode `(i, j, k)` inside an order-`p` element.
pub fn elemental_dof_index(i: usize, j: usize, k: usize, p: usize) -> Result<usize> {
    if i > p || j > p || k > p {
        return Err(Error::InvalidArgument(format!(
            "tensor index ({i}, {j}, {k}) out of range for order {p}"
        )));
    }
    Ok((p + 1) * (p + 1) * i + (p + 1) * j + k)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
