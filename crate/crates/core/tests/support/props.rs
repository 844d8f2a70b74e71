//! Randomized invariant checks, each over `CASES` inputs with its own fixed
//! seed. Module test files run them individually; the acceptance suite runs
//! the whole table.

use std::path::Path;
use std::sync::OnceLock;

use giamg::coarsen_h::{
    mis_aggregate, smooth_prolongation, strength_graph, tentative_prolongation,
};
use giamg::coarsen_p::coarsen_p_level;
use giamg::dofmaps::{dof_next, l2g_next, retained_positions, GlobalToUniversalMap, LocalToGlobalMap};
use giamg::fem::{element_operator, phi_1d, structured_l2g, HexMesh};
use giamg::io;
use giamg::krylov::{diagonal_preconditioner, pcg_solve};
use giamg::lu::DenseLu;
use giamg::smoothers::{chebyshev_smooth, ChebyshevData};
use giamg::sparse::{self, coo_to_csr, coo_to_csr_summed, SparseMatrix};
use giamg::{assemble_helmholtz, BoundaryPolicy, Hierarchy, SolveOptions, Timings};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::*;

type Check = fn() -> Result<(), String>;

pub const ALL: &[(&str, Check)] = &[
    ("csr invariants after coo_to_csr", csr_invariants),
    ("csr triplet round trip is idempotent", csr_round_trip),
    ("summed assembly matches dense accumulation", csr_summed),
    ("spmv matches dense oracle", spmv_oracle),
    ("transpose matches dense oracle and adjoint identity", transpose_oracle),
    ("matmul matches dense oracle and is associative", matmul_oracle),
    ("galerkin triple is symmetric for R = P^T", galerkin_symmetry),
    ("injection galerkin equals submatrix extraction", injection_galerkin_extraction),
    ("single-element map reconstruction equals brute force", single_element_maps),
    ("multi-element maps are consistent and nested", multi_element_maps),
    ("injection prolongation has P^T P = I", injection_orthonormal),
    ("injection prolongations compose", injection_composition),
    ("aggregation partition laws", aggregation_partition),
    ("tentative prolongation preserves constants", tentative_constants),
    ("smoothed coarse operator stays SPD", coarse_operator_spd),
    ("chebyshev damping equals closed-form laplacian factor", chebyshev_damping),
    ("chebyshev smoothing is linear in b", chebyshev_linearity),
    ("element operator is symmetric positive definite", element_operator_spd),
    ("modal basis vertex and bubble laws", modal_basis_laws),
    ("v-cycle is linear and symmetric", vcycle_linear_symmetric),
    ("pcg energy error is monotone", pcg_energy_monotone),
    ("matrix market round trip", matrix_market_round_trip),
    ("vector and map files round trip", map_files_round_trip),
];

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

pub fn csr_invariants() -> Result<(), String> {
    check(0x5EED_0001, triplets(1..30, 1..30), |(m, n, t)| {
        let a = coo_to_csr(&t, m, n).map_err(|e| fail(e.to_string()))?;
        csr_well_formed(&a).map_err(fail)?;
        let expect = dense_first_wins(m, n, &t);
        ensure(a.to_dense() == expect, || "dense view differs from first-wins oracle".into())
    })
}

pub fn csr_round_trip() -> Result<(), String> {
    check(0x5EED_0002, sparse(1..30, 1..30), |a| {
        let t: Vec<_> = a.triplets().collect();
        let b = coo_to_csr(&t, a.nrows(), a.ncols()).unwrap();
        let c = coo_to_csr(&b.triplets().collect::<Vec<_>>(), b.nrows(), b.ncols()).unwrap();
        ensure(a == b && b == c, || "round trip changed the matrix".into())
    })
}

pub fn csr_summed() -> Result<(), String> {
    check(0x5EED_0003, triplets(1..20, 1..20), |(m, n, t)| {
        let a = coo_to_csr_summed(&t, m, n).unwrap();
        csr_well_formed(&a).map_err(fail)?;
        let mut d = vec![0.0; m * n];
        for e in &t {
            d[e.row * n + e.col] += e.value;
        }
        ensure(max_abs_diff(&a.to_dense(), &d) <= 1e-13, || "summed values differ".into())
    })
}

pub fn spmv_oracle() -> Result<(), String> {
    let s = sparse(10..51, 10..51).prop_flat_map(|a| {
        let n = a.ncols();
        (Just(a), vector(n))
    });
    check(0x5EED_0004, s, |(a, x)| {
        let y = a.spmv(&x).unwrap();
        let d = dense_matvec(a.nrows(), a.ncols(), &a.to_dense(), &x);
        ensure(max_abs_diff(&y, &d) <= 1e-13, || "spmv differs from dense".into())
    })
}

pub fn transpose_oracle() -> Result<(), String> {
    let s = sparse(10..51, 10..51).prop_flat_map(|a| {
        let (m, n) = (a.nrows(), a.ncols());
        (Just(a), vector(n), vector(m))
    });
    check(0x5EED_0005, s, |(a, x, y)| {
        let at = a.transpose();
        csr_well_formed(&at).map_err(fail)?;
        ensure(
            at.to_dense() == dense_transpose(a.nrows(), a.ncols(), &a.to_dense()),
            || "transpose differs from dense".into(),
        )?;
        ensure(at.transpose() == a, || "transpose is not an involution".into())?;
        let lhs = dot(&y, &a.spmv(&x).unwrap());
        let rhs = dot(&at.spmv(&y).unwrap(), &x);
        ensure((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), || format!("{lhs} vs {rhs}"))
    })
}

pub fn matmul_oracle() -> Result<(), String> {
    let s = (10usize..31, 10usize..31, 10usize..31, 10usize..31).prop_flat_map(|(m, k, l, n)| {
        (sparse(m..m + 1, k..k + 1), sparse(k..k + 1, l..l + 1), sparse(l..l + 1, n..n + 1))
    });
    check(0x5EED_0006, s, |(a, b, c)| {
        let ab = sparse::matmul(&a, &b).unwrap();
        csr_well_formed(&ab).map_err(fail)?;
        let d = dense_matmul(a.nrows(), a.ncols(), b.ncols(), &a.to_dense(), &b.to_dense());
        ensure(max_abs_diff(&ab.to_dense(), &d) <= 1e-13 * (1.0 + d.iter().fold(0.0, |m: f64, v| m.max(v.abs()))), || {
            "matmul differs from dense".into()
        })?;
        let left = sparse::matmul(&ab, &c).unwrap().to_dense();
        let right = sparse::matmul(&a, &sparse::matmul(&b, &c).unwrap()).unwrap().to_dense();
        let scale = left.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
        ensure(max_abs_diff(&left, &right) <= 1e-12 * scale, || "matmul not associative".into())
    })
}

pub fn galerkin_symmetry() -> Result<(), String> {
    let s = spd(10..40).prop_flat_map(|a| {
        let n = a.nrows();
        (Just(a), sparse(n..n + 1, 2..n))
    });
    check(0x5EED_0007, s, |(a, p)| {
        let r = p.transpose();
        let c = sparse::galerkin_triple(&r, &a, &p).unwrap();
        let n = a.nrows();
        let k = p.ncols();
        let d = dense_matmul(
            k,
            n,
            k,
            &dense_matmul(k, n, n, &r.to_dense(), &a.to_dense()),
            &p.to_dense(),
        );
        let scale = d.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
        ensure(max_abs_diff(&c.to_dense(), &d) <= 1e-12 * scale, || "RAP differs from dense".into())?;
        ensure(c.max_asymmetry() <= 1e-12 * scale, || "RAP not symmetric".into())
    })
}

/// Random fine map of `n^3` order-`p` elements: the structured numbering
/// relabelled by a permutation, plus a permuted g2u.
fn permuted_maps() -> impl Strategy<Value = (LocalToGlobalMap, GlobalToUniversalMap)> {
    (1usize..3, 2usize..5).prop_flat_map(|(n, p)| {
        let g = (n * p + 1).pow(3);
        (
            Just((n, p)),
            Just((0..g).collect::<Vec<_>>()).prop_shuffle(),
            Just((0..g).collect::<Vec<_>>()).prop_shuffle(),
        )
            .prop_map(|((n, p), relabel, g2u)| {
                let base = structured_l2g(&HexMesh::unit_cube(n).unwrap(), p).unwrap();
                let rows: Vec<Vec<usize>> = base.rows().map(|r| r.iter().map(|&d| relabel[d]).collect()).collect();
                (
                    LocalToGlobalMap::from_rows(p, &rows).unwrap(),
                    GlobalToUniversalMap::new(g2u).unwrap(),
                )
            })
    })
}

pub fn injection_galerkin_extraction() -> Result<(), String> {
    let s = permuted_maps().prop_flat_map(|(l2g, g2u)| {
        let n = l2g.n_dofs();
        let p = l2g.order();
        (Just((l2g, g2u)), 1..p, proptest::collection::vec((0..n, 0..n, -5.0..5.0f64), n..4 * n))
    });
    check(0x5EED_0008, s, |((l2g, g2u), pc, entries)| {
        let n = l2g.n_dofs();
        let coo: Vec<_> = entries
            .iter()
            .map(|&(i, j, v)| giamg::CooTriplet::new(i, j, v))
            .collect();
        let a = coo_to_csr(&coo, n, n).unwrap();
        let tr = coarsen_p_level(&l2g, &g2u, pc).unwrap();
        let p = &tr.prolongation;
        let c = sparse::galerkin_triple(&p.transpose(), &a, p).unwrap();
        // Coarse universal column k is injected from the single fine row
        // holding its 1.
        let pt = p.transpose();
        let fine_of: Vec<usize> = (0..pt.nrows()).map(|k| pt.row(k).0[0]).collect();
        for (k1, &f1) in fine_of.iter().enumerate() {
            for (k2, &f2) in fine_of.iter().enumerate() {
                if c.get(k1, k2) != a.get(f1, f2) {
                    return Err(fail(format!("entry ({k1},{k2}) differs from A[{f1},{f2}]")));
                }
            }
        }
        Ok(())
    })
}

pub fn single_element_maps() -> Result<(), String> {
    let s = (2usize..7).prop_flat_map(|p| {
        let d = (p + 1).pow(3);
        (
            Just(p),
            1..p,
            Just((0..d).collect::<Vec<_>>()).prop_shuffle(),
            Just((0..d).collect::<Vec<_>>()).prop_shuffle(),
        )
    });
    check(0x5EED_0009, s, |(p, pc, row, g2u_vals)| {
        let l2g = LocalToGlobalMap::new(p, row.clone()).unwrap();
        let g2u = GlobalToUniversalMap::new(g2u_vals.clone()).unwrap();
        let tr = coarsen_p_level(&l2g, &g2u, pc).unwrap();

        // Brute force: coarse process index = rank among retained fine dofs,
        // coarse universal index = rank among their universal images.
        let mut retained = Vec::new();
        for i in 0..=pc {
            for j in 0..=pc {
                for k in 0..=pc {
                    retained.push(row[(p + 1) * (p + 1) * i + (p + 1) * j + k]);
                }
            }
        }
        let mut sorted = retained.clone();
        sorted.sort_unstable();
        let mut univ: Vec<usize> = retained.iter().map(|&f| g2u_vals[f]).collect();
        univ.sort_unstable();
        for (pos, &fine) in retained.iter().enumerate() {
            let coarse = sorted.binary_search(&fine).unwrap();
            ensure(tr.l2g.row(0)[pos] == coarse, || format!("l2g_next position {pos}"))?;
            let cu = univ.binary_search(&g2u_vals[fine]).unwrap();
            ensure(tr.g2u.get(coarse) == cu, || format!("g2u_next of coarse dof {coarse}"))?;
            ensure(tr.prolongation.get(g2u_vals[fine], cu) == 1.0, || "P entry missing".into())?;
        }
        ensure(tr.prolongation.nnz() == retained.len(), || "P has extra entries".into())
    })
}

pub fn multi_element_maps() -> Result<(), String> {
    let s = permuted_maps().prop_flat_map(|m| {
        let p = m.0.order();
        (Just(m), 1..p)
    });
    check(0x5EED_000A, s, |((l2g, g2u), pc)| {
        let sel = dof_next(&l2g, pc).unwrap();
        let next = l2g_next(&l2g, &sel, pc).unwrap();
        let positions = retained_positions(l2g.order(), pc).unwrap();
        // Shared dofs stay shared: every element's retained fine dofs map
        // through the selection to the coarse row, and the coarse map covers
        // exactly the coarse dof count of a conforming order-pc mesh.
        let n = (l2g.n_elements() as f64).cbrt().round() as usize;
        ensure(next.n_dofs() == (n * pc + 1).pow(3), || "coarse dof count".into())?;
        for (e, (frow, crow)) in l2g.rows().zip(next.rows()).enumerate() {
            for (&pos, &c) in positions.iter().zip(crow) {
                ensure(sel.collect()[c] == frow[pos], || format!("element {e} relabel"))?;
            }
        }
        let tr = coarsen_p_level(&l2g, &g2u, pc).unwrap();
        ensure(tr.g2u.is_permutation() && tr.g2u.len() == next.n_dofs(), || "coarse g2u".into())
    })
}

pub fn injection_orthonormal() -> Result<(), String> {
    let s = permuted_maps().prop_flat_map(|m| {
        let p = m.0.order();
        (Just(m), 1..p)
    });
    check(0x5EED_000B, s, |((l2g, g2u), pc)| {
        let p = coarsen_p_level(&l2g, &g2u, pc).unwrap().prolongation;
        let ptp = sparse::matmul(&p.transpose(), &p).unwrap();
        ensure(ptp == SparseMatrix::identity(p.ncols()), || "P^T P != I".into())?;
        ensure((0..p.nrows()).all(|i| p.row(i).0.len() <= 1), || "fine row with two coarse parents".into())
    })
}

pub fn injection_composition() -> Result<(), String> {
    let s = permuted_maps()
        .prop_filter("needs three orders", |m| m.0.order() >= 3)
        .prop_flat_map(|m| {
            let p = m.0.order();
            (Just(m), 2..p).prop_flat_map(|(m, b)| (Just(m), Just(b), 1..b))
        });
    check(0x5EED_000C, s, |((l2g, g2u), b, c)| {
        let ab = coarsen_p_level(&l2g, &g2u, b).unwrap();
        let bc = coarsen_p_level(&ab.l2g, &ab.g2u, c).unwrap();
        let ac = coarsen_p_level(&l2g, &g2u, c).unwrap();
        let chained = sparse::matmul(&ab.prolongation, &bc.prolongation).unwrap();
        ensure(chained == ac.prolongation, || "P_ab P_bc != P_ac".into())?;
        ensure(bc.g2u == ac.g2u, || "coarse g2u depends on the path".into())
    })
}

fn graph_and_aggregation() -> impl Strategy<Value = (SparseMatrix, f64)> {
    (spd(2..60), 0.0..0.6f64)
}

pub fn aggregation_partition() -> Result<(), String> {
    check(0x5EED_000D, graph_and_aggregation(), |(a, theta)| {
        let g = strength_graph(&a, theta).unwrap();
        let agg = mis_aggregate(&g, 0);
        let n = a.nrows();
        let assign = agg.assignment();
        ensure(assign.len() == n, || "assignment length".into())?;
        ensure(assign.iter().all(|&k| k < agg.n_aggregates()), || "aggregate id out of range".into())?;
        let groups = agg.aggregates();
        ensure(groups.iter().map(Vec::len).sum::<usize>() == n, || "not a partition".into())?;
        ensure(groups.iter().all(|g| !g.is_empty()), || "empty aggregate".into())?;
        ensure(agg.roots().len() == agg.n_aggregates(), || "one root per aggregate".into())?;
        for (k, &r) in agg.roots().iter().enumerate() {
            ensure(assign[r] == k, || format!("root {r} outside its aggregate"))?;
            for &j in g.neighbors(r).0 {
                ensure(!agg.roots().contains(&j), || format!("adjacent roots {r}, {j}"))?;
            }
        }
        for i in 0..n {
            let r = agg.roots()[assign[i]];
            ensure(i == r || g.neighbors(i).0.contains(&r), || format!("{i} not adjacent to root {r}"))?;
        }
        ensure(g.n_edges() == 0 || agg.n_aggregates() < n, || "no progress despite edges".into())
    })
}

pub fn tentative_constants() -> Result<(), String> {
    check(0x5EED_000E, graph_and_aggregation(), |(a, theta)| {
        let agg = mis_aggregate(&strength_graph(&a, theta).unwrap(), 0);
        let t = tentative_prolongation(&agg);
        let ones = t.spmv(&vec![1.0; t.ncols()]).unwrap();
        ensure(ones.iter().all(|&v| v == 1.0), || "T 1 != 1".into())?;
        let ttt = sparse::matmul(&t.transpose(), &t).unwrap();
        let sizes: Vec<f64> = agg.aggregates().iter().map(|g| g.len() as f64).collect();
        ensure(ttt == SparseMatrix::from_diagonal(&sizes), || "T^T T is not diag(sizes)".into())
    })
}

pub fn coarse_operator_spd() -> Result<(), String> {
    check(0x5EED_000F, graph_and_aggregation(), |(a, theta)| {
        let g = strength_graph(&a, theta).unwrap();
        let t = tentative_prolongation(&mis_aggregate(&g, 0));
        let p = smooth_prolongation(&a, &t, 2.0 / 3.0).unwrap();
        for op in [&t, &p] {
            let c = sparse::galerkin_triple(&op.transpose(), &a, op).unwrap();
            let scale = c.max_abs();
            ensure(c.max_asymmetry() <= 1e-12 * scale, || "coarse operator asymmetric".into())?;
            let mut d = c.to_dense();
            let k = c.nrows();
            // Symmetrize away rounding before the factorization.
            for i in 0..k {
                for j in 0..i {
                    let m = 0.5 * (d[i * k + j] + d[j * k + i]);
                    d[i * k + j] = m;
                    d[j * k + i] = m;
                }
            }
            ensure(is_positive_definite(k, &d), || "coarse operator not SPD".into())?;
        }
        Ok(())
    })
}

pub fn chebyshev_damping() -> Result<(), String> {
    let s = (5usize..60, 1usize..6, 2.0..30.0f64, 1.0..1.3f64).prop_flat_map(|(n, k, lo, hi)| {
        (Just((n, k, lo, hi)), 1..=n)
    });
    check(0x5EED_0010, s, |((n, k, lo, hi), mode)| {
        let a = laplace_1d(n);
        let h = std::f64::consts::PI / (n + 1) as f64;
        let mu = |j: usize| 1.0 - (j as f64 * h).cos();
        let data = ChebyshevData::with_lambda_max(&a, mu(n), lo, hi, k).unwrap();
        let v: Vec<f64> = (1..=n).map(|i| (i as f64 * mode as f64 * h).sin()).collect();
        let mut x = v.clone();
        chebyshev_smooth(&a, &data, &vec![0.0; n], &mut x).unwrap();
        let expect = data.damping_factor(mu(mode));
        let err = max_abs_diff(&x, &v.iter().map(|vi| vi * expect).collect::<Vec<_>>());
        ensure(err <= 1e-10 * (1.0 + expect.abs()), || format!("mode {mode}: error {err}"))?;
        // Inside the target interval the factor obeys the Chebyshev bound.
        let (a_lo, a_hi) = data.interval();
        let m = mu(mode);
        if m >= a_lo && m <= a_hi {
            let sigma = (a_hi + a_lo) / (a_hi - a_lo);
            let bound = 1.0 / (k as f64 * sigma.acosh()).cosh();
            ensure(expect.abs() <= bound * (1.0 + 1e-12), || format!("factor {expect} above bound {bound}"))?;
        }
        Ok(())
    })
}

pub fn chebyshev_linearity() -> Result<(), String> {
    let s = spd(5..40).prop_flat_map(|a| {
        let n = a.nrows();
        (Just(a), vector(n), vector(n), -3.0..3.0f64, 1usize..5)
    });
    check(0x5EED_0011, s, |(a, b1, b2, alpha, k)| {
        let data = ChebyshevData::new(
            &a,
            &giamg::smoothers::ChebyshevOptions {
                iterations: k,
                ..Default::default()
            },
        )
        .unwrap();
        let n = a.nrows();
        let run = |b: &[f64]| {
            let mut x = vec![0.0; n];
            chebyshev_smooth(&a, &data, b, &mut x).unwrap();
            x
        };
        let combo: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| alpha * x + y).collect();
        let lhs = run(&combo);
        let rhs: Vec<f64> = run(&b1).iter().zip(run(&b2)).map(|(x, y)| alpha * x + y).collect();
        ensure(max_abs_diff(&lhs, &rhs) <= 1e-12 * (1.0 + norm(&rhs)), || "smoother not linear".into())
    })
}

pub fn element_operator_spd() -> Result<(), String> {
    let s = (1usize..5, 0.05..2.0f64, 0.05..2.0f64, 0.05..2.0f64, 0.0..10.0f64);
    check(0x5EED_0012, s, |(p, hx, hy, hz, lambda)| {
        let k = element_operator(p, [hx, hy, hz], lambda);
        let d = (p + 1).pow(3);
        let scale = k.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                ensure((k[i * d + j] - k[j * d + i]).abs() <= 1e-13 * scale, || "asymmetric".into())?;
            }
        }
        if lambda > 1e-3 {
            ensure(is_positive_definite(d, &k), || "not positive definite".into())?;
        }
        Ok(())
    })
}

pub fn modal_basis_laws() -> Result<(), String> {
    check(0x5EED_0013, (1usize..12, -1.0..1.0f64), |(p, a)| {
        let sum = phi_1d(0, p, a).unwrap() + phi_1d(1, p, a).unwrap();
        ensure((sum - 1.0).abs() <= 1e-15, || "vertex modes do not sum to one".into())?;
        for i in 2..=p {
            ensure(phi_1d(i, p, -1.0).unwrap() == 0.0 && phi_1d(i, p, 1.0).unwrap() == 0.0, || {
                format!("bubble {i} nonzero at an endpoint")
            })?;
        }
        ensure(phi_1d(p + 1, p, a).is_err(), || "mode beyond order accepted".into())
    })
}

struct SmallSystem {
    hierarchy: Hierarchy,
}

fn small_system() -> &'static SmallSystem {
    static SYS: OnceLock<SmallSystem> = OnceLock::new();
    SYS.get_or_init(|| {
        let sys = assemble_helmholtz(&HexMesh::unit_cube(2).unwrap(), 3, 1.0, BoundaryPolicy::Penalty).unwrap();
        SmallSystem {
            hierarchy: sys.hierarchy(&SolveOptions::default()).unwrap(),
        }
    })
}

pub fn vcycle_linear_symmetric() -> Result<(), String> {
    let n = small_system().hierarchy.finest().nrows();
    let s = (vector(n), vector(n), -2.0..2.0f64);
    check(0x5EED_0014, s, |(v, w, alpha)| {
        let h = &small_system().hierarchy;
        let mut ws = h.workspace();
        let mut t = Timings::default();
        let mut m = |b: &[f64]| {
            let mut z = vec![0.0; b.len()];
            h.apply(b, &mut z, &mut ws, &mut t);
            z
        };
        let (mv, mw) = (m(&v), m(&w));
        let combo: Vec<f64> = v.iter().zip(&w).map(|(x, y)| alpha * x + y).collect();
        let mc = m(&combo);
        let expect: Vec<f64> = mv.iter().zip(&mw).map(|(x, y)| alpha * x + y).collect();
        ensure(max_abs_diff(&mc, &expect) <= 1e-10 * norm(&expect).max(1e-300), || "V-cycle not linear".into())?;
        let (a, b) = (dot(&w, &mv), dot(&v, &mw));
        ensure((a - b).abs() <= 1e-10 * (norm(&w) * norm(&mv)), || format!("asymmetric: {a} vs {b}"))
    })
}

pub fn pcg_energy_monotone() -> Result<(), String> {
    let s = spd(10..40).prop_flat_map(|a| {
        let n = a.nrows();
        (Just(a), vector(n))
    });
    check(0x5EED_0015, s, |(a, b)| {
        if norm(&b) == 0.0 {
            return Ok(());
        }
        let n = a.nrows();
        let exact = DenseLu::factor_sparse(&a).unwrap().solve(&b).unwrap();
        let energy = |x: &[f64]| {
            let e: Vec<f64> = x.iter().zip(&exact).map(|(u, v)| u - v).collect();
            dot(&e, &a.spmv(&e).unwrap())
        };
        let mut prev = energy(&vec![0.0; n]);
        let full = {
            let mut m = diagonal_preconditioner(&a).unwrap();
            pcg_solve(&a, &b, None, &mut m, &SolveOptions::default()).unwrap().1
        };
        ensure(full.converged && full.relres.len() == full.iterations + 1, || "log shape".into())?;
        for k in 1..=full.iterations {
            let opts = SolveOptions {
                max_iters: k,
                ..Default::default()
            };
            let mut m = diagonal_preconditioner(&a).unwrap();
            let (x, _) = pcg_solve(&a, &b, None, &mut m, &opts).unwrap();
            let cur = energy(&x);
            ensure(cur <= prev * (1.0 + 1e-10) + 1e-24, || format!("energy rose at {k}: {prev} -> {cur}"))?;
            prev = cur;
        }
        Ok(())
    })
}

pub fn matrix_market_round_trip() -> Result<(), String> {
    let s = sparse(1..25, 1..25);
    check(0x5EED_0016, s, |a| {
        let text = io::format_matrix_market(&a);
        let b = io::parse_matrix_market(&text, Path::new("prop.mtx")).map_err(|e| fail(e.to_string()))?;
        ensure(a == b, || "matrix changed through Matrix Market".into())
    })
}

pub fn map_files_round_trip() -> Result<(), String> {
    let s = (
        proptest::collection::vec(prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3..1e3f64], 0..50),
        permuted_maps(),
    );
    check(0x5EED_0017, s, |(v, (l2g, g2u))| {
        let path = Path::new("prop");
        let v2 = io::parse_vector(&io::format_vector(&v), path).map_err(|e| fail(e.to_string()))?;
        ensure(v == v2, || "vector changed".into())?;
        let l2 = io::parse_l2g(&io::format_l2g(&l2g), path).map_err(|e| fail(e.to_string()))?;
        ensure(l2 == l2g, || "l2g changed".into())?;
        let g2 = io::parse_g2u(&io::format_g2u(&g2u), path).map_err(|e| fail(e.to_string()))?;
        ensure(g2 == g2u, || "g2u changed".into())
    })
}
