//! High-order Helmholtz systems on structured hexahedral meshes.
//!
//! Solves `-lap(u) + lambda u = g` with homogeneous Dirichlet data, where `g`
//! is manufactured from `u = sin(pi x) sin(pi y) sin(pi z)`. Elements are
//! identical axis-aligned boxes, so the element operator is assembled once
//! from 1D mass and stiffness factors and scattered into every element.
//!
//! Global numbering is lexicographic over the grid of mode positions: along
//! each axis, element `e` places vertex mode 0 at `e p`, vertex mode 1 at
//! `(e + 1) p` and bubble mode `m >= 2` at `e p + m - 1`. Vertex modes of
//! neighbouring elements therefore share a position; bubbles never do.

mod basis;

pub use basis::{
    elemental_dof_index, gauss_legendre, jacobi_poly, jacobi_poly_derivative, phi_1d,
    ModalBasis1D,
};
pub(crate) use basis::{mode_derivative, mode_value};

use std::f64::consts::PI;

use crate::dofmaps::{GlobalToUniversalMap, LocalToGlobalMap};
use crate::error::{Error, Result};
use crate::lu::DenseLu;
use crate::sparse::{coo_to_csr_summed, CooTriplet, SparseMatrix};

/// Penalty factor relative to the largest assembled diagonal entry.
pub const PENALTY_SCALE: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexMesh {
    n_per_dim: usize,
    lo: [f64; 3],
    hi: [f64; 3],
}

impl HexMesh {
    pub fn new(n_per_dim: usize, lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        if n_per_dim == 0 {
            return Err(Error::InvalidArgument("mesh needs at least one element per axis".into()));
        }
        if (0..3).any(|d| !(hi[d] > lo[d])) {
            return Err(Error::InvalidArgument(format!(
                "domain corners {lo:?} / {hi:?} are not ordered"
            )));
        }
        Ok(Self { n_per_dim, lo, hi })
    }

    /// `n^3` elements on the unit cube.
    pub fn unit_cube(n_per_dim: usize) -> Result<Self> {
        Self::new(n_per_dim, [0.0; 3], [1.0; 3])
    }

    pub fn n_per_dim(&self) -> usize {
        self.n_per_dim
    }

    pub fn n_elements(&self) -> usize {
        self.n_per_dim.pow(3)
    }

    pub fn lo(&self) -> [f64; 3] {
        self.lo
    }

    pub fn hi(&self) -> [f64; 3] {
        self.hi
    }

    pub fn element_size(&self) -> [f64; 3] {
        let n = self.n_per_dim as f64;
        [
            (self.hi[0] - self.lo[0]) / n,
            (self.hi[1] - self.lo[1]) / n,
            (self.hi[2] - self.lo[2]) / n,
        ]
    }

    /// Index of the element containing `point` and the point's reference
    /// coordinates in `[-1, 1]^3`.
    pub fn locate(&self, point: [f64; 3]) -> Result<(usize, [f64; 3])> {
        let h = self.element_size();
        let mut idx = [0usize; 3];
        let mut local = [0.0; 3];
        for d in 0..3 {
            let x = point[d];
            if !(x >= self.lo[d] && x <= self.hi[d]) {
                return Err(Error::InvalidArgument(format!(
                    "point {point:?} outside the domain {:?} / {:?}",
                    self.lo, self.hi
                )));
            }
            let e = (((x - self.lo[d]) / h[d]).floor() as usize).min(self.n_per_dim - 1);
            let x0 = self.lo[d] + e as f64 * h[d];
            idx[d] = e;
            local[d] = (2.0 * (x - x0) / h[d] - 1.0).clamp(-1.0, 1.0);
        }
        let n = self.n_per_dim;
        Ok(((idx[0] * n + idx[1]) * n + idx[2], local))
    }
}

/// How the homogeneous Dirichlet condition enters the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Adds `PENALTY_SCALE * max|diag(A)|` to boundary diagonals; keeps the
    /// full sparsity pattern.
    #[default]
    Penalty,
    /// Zeroes boundary rows and columns and puts 1 on their diagonal. The
    /// system keeps its size so the dof maps stay valid.
    Eliminate,
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub l2g: LocalToGlobalMap,
    pub g2u: GlobalToUniversalMap,
    /// L2 projection of the manufactured solution onto the global basis.
    pub exact_coeffs: Vec<f64>,
    pub order: usize,
    pub mesh: HexMesh,
    pub lambda: f64,
    pub bc: BoundaryPolicy,
}

impl AssembledSystem {
    pub fn n_dofs(&self) -> usize {
        self.a.nrows()
    }

    /// Value of the discrete field with coefficients `coeffs` at `point`.
    pub fn evaluate(&self, coeffs: &[f64], point: [f64; 3]) -> Result<f64> {
        evaluate_solution(self, coeffs, point)
    }
}

/// The manufactured solution `sin(pi x) sin(pi y) sin(pi z)`.
pub fn manufactured_solution(point: [f64; 3]) -> f64 {
    (PI * point[0]).sin() * (PI * point[1]).sin() * (PI * point[2]).sin()
}

/// Right-hand side consistent with [`manufactured_solution`]:
/// `-lap(u) + lambda u = (lambda + 3 pi^2) u`.
pub fn manufactured_forcing(lambda: f64, point: [f64; 3]) -> f64 {
    (lambda + 3.0 * PI * PI) * manufactured_solution(point)
}

/// Grid position of 1D mode `m` in element `e` for order `p`.
fn mode_position(e: usize, m: usize, p: usize) -> usize {
    match m {
        0 => e * p,
        1 => (e + 1) * p,
        _ => e * p + m - 1,
    }
}

/// Number of global mode positions along one axis.
pub fn grid_points_per_dim(n_per_dim: usize, p: usize) -> usize {
    n_per_dim * p + 1
}

/// Element-to-dof map of the structured numbering.
pub fn structured_l2g(mesh: &HexMesh, p: usize) -> Result<LocalToGlobalMap> {
    let n = mesh.n_per_dim();
    let g = grid_points_per_dim(n, p);
    let per = (p + 1).pow(3);
    let mut entries = Vec::with_capacity(mesh.n_elements() * per);
    for ex in 0..n {
        for ey in 0..n {
            for ez in 0..n {
                for i in 0..=p {
                    let x = mode_position(ex, i, p);
                    for j in 0..=p {
                        let y = mode_position(ey, j, p);
                        for k in 0..=p {
                            let z = mode_position(ez, k, p);
                            entries.push((x * g + y) * g + z);
                        }
                    }
                }
            }
        }
    }
    LocalToGlobalMap::new(p, entries)
}

/// 1D element mass and stiffness matrices on an interval of length `h`,
/// row-major `(p+1) x (p+1)`.
pub fn element_matrices_1d(p: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let (nodes, weights) = gauss_legendre(p + 2);
    let m = p + 1;
    let mut mass = vec![0.0; m * m];
    let mut stiff = vec![0.0; m * m];
    let jac = 0.5 * h;
    for (&a, &w) in nodes.iter().zip(&weights) {
        let v: Vec<f64> = (0..m).map(|i| mode_value(i, a)).collect();
        let d: Vec<f64> = (0..m).map(|i| mode_derivative(i, a)).collect();
        for i in 0..m {
            for j in 0..m {
                mass[i * m + j] += w * v[i] * v[j] * jac;
                stiff[i * m + j] += w * d[i] * d[j] / jac;
            }
        }
    }
    (mass, stiff)
}

/// Element Helmholtz operator on an `hx x hy x hz` box, row-major over the
/// tensor dof ordering.
pub fn element_operator(p: usize, h: [f64; 3], lambda: f64) -> Vec<f64> {
    let m = p + 1;
    let per = m * m * m;
    let (mx, kx) = element_matrices_1d(p, h[0]);
    let (my, ky) = element_matrices_1d(p, h[1]);
    let (mz, kz) = element_matrices_1d(p, h[2]);
    let mut out = vec![0.0; per * per];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let row = (i * m + j) * m + k;
                for l in 0..m {
                    let (mil, kil) = (mx[i * m + l], kx[i * m + l]);
                    for n in 0..m {
                        let (mjn, kjn) = (my[j * m + n], ky[j * m + n]);
                        for q in 0..m {
                            let (mkq, kkq) = (mz[k * m + q], kz[k * m + q]);
                            let col = (l * m + n) * m + q;
                            out[row * per + col] = kil * mjn * mkq
                                + mil * kjn * mkq
                                + mil * mjn * kkq
                                + lambda * mil * mjn * mkq;
                        }
                    }
                }
            }
        }
    }
    out
}

/// `int f phi_ijk` over one element, by tensor Gauss-Legendre quadrature.
fn element_load(
    p: usize,
    origin: [f64; 3],
    h: [f64; 3],
    f: &dyn Fn([f64; 3]) -> f64,
) -> Vec<f64> {
    let nq = p + 2;
    let m = p + 1;
    let (nodes, weights) = gauss_legendre(nq);
    let phys = |d: usize, a: f64| origin[d] + 0.5 * (a + 1.0) * h[d];
    let jac = h[0] * h[1] * h[2] / 8.0;
    let basis: Vec<f64> = (0..m)
        .flat_map(|i| nodes.iter().map(move |&a| mode_value(i, a)))
        .collect();
    // Contract one axis at a time: z, then y, then x.
    let mut fz = vec![0.0; nq * nq * m];
    for qx in 0..nq {
        for qy in 0..nq {
            for qz in 0..nq {
                let pt = [phys(0, nodes[qx]), phys(1, nodes[qy]), phys(2, nodes[qz])];
                let val = weights[qx] * weights[qy] * weights[qz] * f(pt) * jac;
                for k in 0..m {
                    fz[(qx * nq + qy) * m + k] += val * basis[k * nq + qz];
                }
            }
        }
    }
    let mut fy = vec![0.0; nq * m * m];
    for qx in 0..nq {
        for qy in 0..nq {
            for j in 0..m {
                let bj = basis[j * nq + qy];
                for k in 0..m {
                    fy[(qx * m + j) * m + k] += bj * fz[(qx * nq + qy) * m + k];
                }
            }
        }
    }
    let mut out = vec![0.0; m * m * m];
    for qx in 0..nq {
        for i in 0..m {
            let bi = basis[i * nq + qx];
            for jk in 0..m * m {
                out[i * m * m + jk] += bi * fy[qx * m * m + jk];
            }
        }
    }
    out
}

/// Global dofs whose basis function does not vanish on the domain boundary.
fn boundary_mask(n_per_dim: usize, p: usize) -> Vec<bool> {
    let g = grid_points_per_dim(n_per_dim, p);
    let on = |c: usize| c == 0 || c == g - 1;
    let mut mask = vec![false; g * g * g];
    for x in 0..g {
        for y in 0..g {
            for z in 0..g {
                mask[(x * g + y) * g + z] = on(x) || on(y) || on(z);
            }
        }
    }
    mask
}

/// Assembles the manufactured Helmholtz problem of order `p` on `mesh`.
pub fn assemble_helmholtz(
    mesh: &HexMesh,
    p: usize,
    lambda: f64,
    bc: BoundaryPolicy,
) -> Result<AssembledSystem> {
    if p == 0 {
        return Err(Error::InvalidArgument("polynomial order must be at least 1".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be >= 0")));
    }
    let l2g = structured_l2g(mesh, p)?;
    let n_dofs = l2g.n_dofs();
    let h = mesh.element_size();
    let ke = element_operator(p, h, lambda);
    let per = (p + 1).pow(3);
    let mask = boundary_mask(mesh.n_per_dim(), p);

    let mut triplets = Vec::with_capacity(mesh.n_elements() * per * per);
    for row in l2g.rows() {
        for (r, &gr) in row.iter().enumerate() {
            if bc == BoundaryPolicy::Eliminate && mask[gr] {
                continue;
            }
            for (c, &gc) in row.iter().enumerate() {
                if bc == BoundaryPolicy::Eliminate && mask[gc] {
                    continue;
                }
                let v = ke[r * per + c];
                if v != 0.0 {
                    triplets.push(CooTriplet::new(gr, gc, v));
                }
            }
        }
    }
    let mut b = vec![0.0; n_dofs];
    let n = mesh.n_per_dim();
    let lo = mesh.lo();
    let forcing = |pt: [f64; 3]| manufactured_forcing(lambda, pt);
    for (e, row) in l2g.rows().enumerate() {
        let (ex, ey, ez) = (e / (n * n), (e / n) % n, e % n);
        let origin = [
            lo[0] + ex as f64 * h[0],
            lo[1] + ey as f64 * h[1],
            lo[2] + ez as f64 * h[2],
        ];
        let load = element_load(p, origin, h, &forcing);
        for (&g, v) in row.iter().zip(load) {
            b[g] += v;
        }
    }

    let a = match bc {
        BoundaryPolicy::Penalty => {
            let mut diag = vec![0.0; n_dofs];
            for row in l2g.rows() {
                for (r, &g) in row.iter().enumerate() {
                    diag[g] += ke[r * per + r];
                }
            }
            let beta = PENALTY_SCALE * diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            for (g, &on) in mask.iter().enumerate() {
                if on {
                    triplets.push(CooTriplet::new(g, g, beta));
                    // b_g = beta * g_D with g_D = 0
                    b[g] = 0.0;
                }
            }
            coo_to_csr_summed(&triplets, n_dofs, n_dofs)?
        }
        BoundaryPolicy::Eliminate => {
            for (g, &on) in mask.iter().enumerate() {
                if on {
                    triplets.push(CooTriplet::new(g, g, 1.0));
                    b[g] = 0.0;
                }
            }
            coo_to_csr_summed(&triplets, n_dofs, n_dofs)?
        }
    };
    drop(triplets);

    let exact_coeffs = project_separable(mesh, p, [
        &|x: f64| (PI * x).sin(),
        &|y: f64| (PI * y).sin(),
        &|z: f64| (PI * z).sin(),
    ])?;

    Ok(AssembledSystem {
        a,
        b,
        g2u: GlobalToUniversalMap::identity(n_dofs),
        l2g,
        exact_coeffs,
        order: p,
        mesh: *mesh,
        lambda,
        bc,
    })
}

/// L2 projection of `f(x) g(y) h(z)` onto the global basis.
///
/// The global space is the tensor product of the 1D global spaces along each
/// axis, and so is its mass matrix, so the projection factorizes into three
/// 1D mass solves.
pub fn project_separable(
    mesh: &HexMesh,
    p: usize,
    factors: [&dyn Fn(f64) -> f64; 3],
) -> Result<Vec<f64>> {
    let g = grid_points_per_dim(mesh.n_per_dim(), p);
    let h = mesh.element_size();
    let mut per_axis = Vec::with_capacity(3);
    for d in 0..3 {
        let (mass, load) = global_1d_mass_and_load(mesh, p, d, h[d], factors[d]);
        let lu = DenseLu::factor(g, mass)?;
        per_axis.push(lu.solve(&load)?);
    }
    let mut out = vec![0.0; g * g * g];
    for x in 0..g {
        for y in 0..g {
            let cxy = per_axis[0][x] * per_axis[1][y];
            for z in 0..g {
                out[(x * g + y) * g + z] = cxy * per_axis[2][z];
            }
        }
    }
    Ok(out)
}

fn global_1d_mass_and_load(
    mesh: &HexMesh,
    p: usize,
    axis: usize,
    h: f64,
    f: &dyn Fn(f64) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = mesh.n_per_dim();
    let g = grid_points_per_dim(n, p);
    // Over-integrate the load: f is not polynomial.
    let (nodes, weights) = gauss_legendre(p + 12);
    let (emass, _) = element_matrices_1d(p, h);
    let mut mass = vec![0.0; g * g];
    let mut load = vec![0.0; g];
    for e in 0..n {
        let x0 = mesh.lo()[axis] + e as f64 * h;
        for i in 0..=p {
            let gi = mode_position(e, i, p);
            for j in 0..=p {
                mass[gi * g + mode_position(e, j, p)] += emass[i * (p + 1) + j];
            }
            load[gi] += nodes
                .iter()
                .zip(&weights)
                .map(|(&a, &w)| w * mode_value(i, a) * f(x0 + 0.5 * (a + 1.0) * h) * 0.5 * h)
                .sum::<f64>();
        }
    }
    (mass, load)
}

/// Evaluates `sum_d coeffs[g2u(l2g(e, d))] Phi_d` at `point`.
pub fn evaluate_solution(sys: &AssembledSystem, coeffs: &[f64], point: [f64; 3]) -> Result<f64> {
    if coeffs.len() != sys.g2u.len() {
        return Err(Error::DimensionMismatch {
            op: "evaluate_solution",
            expected: sys.g2u.len(),
            found: coeffs.len(),
        });
    }
    let (element, local) = sys.mesh.locate(point)?;
    let p = sys.order;
    let m = p + 1;
    let vx: Vec<f64> = (0..m).map(|i| mode_value(i, local[0])).collect();
    let vy: Vec<f64> = (0..m).map(|i| mode_value(i, local[1])).collect();
    let vz: Vec<f64> = (0..m).map(|i| mode_value(i, local[2])).collect();
    let row = sys.l2g.row(element);
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            let vxy = vx[i] * vy[j];
            for k in 0..m {
                let dof = row[(i * m + j) * m + k];
                sum += coeffs[sys.g2u.get(dof)] * vxy * vz[k];
            }
        }
    }
    Ok(sum)
}
