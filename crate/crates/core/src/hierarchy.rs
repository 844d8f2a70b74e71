//! Multigrid level stack and the V-cycle.
//!
//! Setup lowers the polynomial order along a [`PSchedule`] using injection
//! prolongations built from the dof maps, then continues with smoothed
//! aggregation on the order-one operator until the system is small enough
//! for a dense factorization. Every coarse operator is the Galerkin product
//! `P^T A P`. Nothing is built during a solve.

use std::time::Instant;

use log::{debug, warn};

use crate::coarsen_h::{coarsen_h_level, HCoarsenOptions, ProlongationSmoother};
use crate::coarsen_p::{coarsen_p_level, PSchedule};
use crate::dofmaps::{GlobalToUniversalMap, LocalToGlobalMap};
use crate::error::{Error, Result};
use crate::fem::AssembledSystem;
use crate::lu::{coarsest_factorize, DenseLu};
use crate::smoothers::{chebyshev_smooth_with, ChebyshevData, ChebyshevOptions, ChebyshevWorkspace};
use crate::sparse::{galerkin_triple, SparseMatrix};
use crate::timing::{timed, Timings};

/// Refuse dense coarsest factorizations beyond this many rows.
pub const DENSE_COARSEST_LIMIT: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionerKind {
    #[default]
    Giamg,
    Diagonal,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub rtol: f64,
    pub max_iters: usize,
    /// Chebyshev iterations, applied identically before and after the
    /// coarse-grid correction.
    pub smooth_iters: usize,
    pub p_schedule: PSchedule,
    pub theta: f64,
    pub coarsest_max_size: usize,
    pub max_h_levels: usize,
    pub preconditioner: PreconditionerKind,
    pub lo_factor: f64,
    pub hi_factor: f64,
    pub power_iters: usize,
    pub seed: u64,
    pub prolongation_smoother: ProlongationSmoother,
}

impl Default for SolveOptions {
    fn default() -> Self {
        let cheb = ChebyshevOptions::default();
        Self {
            rtol: 1e-10,
            max_iters: 5000,
            smooth_iters: 2,
            p_schedule: PSchedule::Stride(1),
            theta: 0.25,
            coarsest_max_size: 1000,
            max_h_levels: 6,
            preconditioner: PreconditionerKind::Giamg,
            lo_factor: cheb.lo_factor,
            hi_factor: cheb.hi_factor,
            power_iters: cheb.power_iters,
            seed: 0,
            prolongation_smoother: ProlongationSmoother::default(),
        }
    }
}

impl SolveOptions {
    pub fn with_p_stride(mut self, stride: usize) -> Self {
        self.p_schedule = PSchedule::Stride(stride);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) {
            return Err(Error::InvalidArgument(format!("rtol = {} must be > 0", self.rtol)));
        }
        for (name, v) in [
            ("max_iters", self.max_iters),
            ("smooth_iters", self.smooth_iters),
            ("coarsest_max_size", self.coarsest_max_size),
            ("max_h_levels", self.max_h_levels),
            ("power_iters", self.power_iters),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        if let PSchedule::Stride(0) = self.p_schedule {
            return Err(Error::InvalidArgument("p stride must be >= 1".into()));
        }
        Ok(())
    }

    fn chebyshev(&self) -> ChebyshevOptions {
        ChebyshevOptions {
            iterations: self.smooth_iters,
            lo_factor: self.lo_factor,
            hi_factor: self.hi_factor,
            power_iters: self.power_iters,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelKind {
    /// Coarsened by lowering the polynomial order.
    P,
    /// Coarsened by smoothed aggregation.
    H,
    /// Solved directly.
    Coarsest,
}

#[derive(Debug, Clone)]
pub struct Level {
    pub kind: LevelKind,
    /// Polynomial order, when the level still corresponds to one.
    pub order: Option<usize>,
    pub a: SparseMatrix,
    pub prolongation: Option<SparseMatrix>,
    pub restriction: Option<SparseMatrix>,
    pub smoother: Option<ChebyshevData>,
}

impl Level {
    pub fn size(&self) -> usize {
        self.a.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.a.nnz()
    }
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    levels: Vec<Level>,
    coarsest: DenseLu,
}

/// Geometric input for p-coarsening.
#[derive(Debug, Clone, Copy)]
pub struct DofMaps<'a> {
    pub order: usize,
    pub l2g: &'a LocalToGlobalMap,
    pub g2u: &'a GlobalToUniversalMap,
}

impl AssembledSystem {
    pub fn dof_maps(&self) -> DofMaps<'_> {
        DofMaps {
            order: self.order,
            l2g: &self.l2g,
            g2u: &self.g2u,
        }
    }

    pub fn hierarchy(&self, opts: &SolveOptions) -> Result<Hierarchy> {
        setup(&self.a, Some(self.dof_maps()), opts)
    }
}

/// Builds the level stack for `a`. `maps` may be omitted for order-one
/// systems, which go straight to smoothed aggregation.
pub fn setup(a: &SparseMatrix, maps: Option<DofMaps<'_>>, opts: &SolveOptions) -> Result<Hierarchy> {
    opts.validate()?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "hierarchy setup (square operator)",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if !a.is_symmetric(1e-10) {
        return Err(Error::InvalidArgument(format!(
            "operator is not symmetric (max asymmetry {:e})",
            a.max_asymmetry()
        )));
    }
    let cheb = opts.chebyshev();
    let mut levels = Vec::new();
    let mut current = a.clone();
    let mut order = maps.map(|m| m.order);

    if let Some(m) = maps {
        if m.l2g.order() != m.order {
            return Err(Error::MapInconsistency(format!(
                "l2g order {} differs from the system order {}",
                m.l2g.order(),
                m.order
            )));
        }
        if m.g2u.len() != a.nrows() || m.l2g.n_dofs() != a.nrows() || !m.g2u.is_permutation() {
            return Err(Error::MapInconsistency(format!(
                "maps cover {} process dofs / {} universal dofs for a {}-row operator",
                m.l2g.n_dofs(),
                m.g2u.len(),
                a.nrows()
            )));
        }
        let plan = opts.p_schedule.plan(m.order)?;
        let mut l2g = m.l2g.clone();
        let mut g2u = m.g2u.clone();
        for (p_fine, p_coarse) in plan.steps() {
            let transfer = coarsen_p_level(&l2g, &g2u, p_coarse)?;
            let p = transfer.prolongation;
            let r = p.transpose();
            let coarse = galerkin_triple(&r, &current, &p)?;
            debug!(
                "p-level {p_fine} -> {p_coarse}: {} -> {} dofs, nnz {} -> {}",
                current.nrows(),
                coarse.nrows(),
                current.nnz(),
                coarse.nnz()
            );
            let smoother = ChebyshevData::new(&current, &cheb)?;
            levels.push(Level {
                kind: LevelKind::P,
                order: Some(p_fine),
                a: std::mem::replace(&mut current, coarse),
                prolongation: Some(p),
                restriction: Some(r),
                smoother: Some(smoother),
            });
            l2g = transfer.l2g;
            g2u = transfer.g2u;
            order = Some(p_coarse);
        }
    } else if order.is_none() {
        order = Some(1);
    }
    if let Some(o) = order {
        if o > 1 {
            return Err(Error::InvalidArgument(format!(
                "order-{o} system needs l2g/g2u maps for p-coarsening"
            )));
        }
    }

    let h_opts = HCoarsenOptions {
        theta: opts.theta,
        smoother: opts.prolongation_smoother,
        seed: opts.seed,
    };
    let mut h_levels = 0;
    while current.nrows() > opts.coarsest_max_size && h_levels < opts.max_h_levels {
        let Some(p) = coarsen_h_level(&current, &h_opts)? else {
            warn!("aggregation stalled at {} dofs", current.nrows());
            break;
        };
        let r = p.transpose();
        let coarse = galerkin_triple(&r, &current, &p)?;
        debug!(
            "h-level: {} -> {} dofs, nnz {} -> {}",
            current.nrows(),
            coarse.nrows(),
            current.nnz(),
            coarse.nnz()
        );
        let smoother = ChebyshevData::new(&current, &cheb)?;
        levels.push(Level {
            kind: LevelKind::H,
            order: if h_levels == 0 { order } else { None },
            a: std::mem::replace(&mut current, coarse),
            prolongation: Some(p),
            restriction: Some(r),
            smoother: Some(smoother),
        });
        h_levels += 1;
    }

    if current.nrows() > opts.coarsest_max_size {
        warn!(
            "coarsest level has {} dofs, above coarsest_max_size = {}",
            current.nrows(),
            opts.coarsest_max_size
        );
    }
    if current.nrows() > DENSE_COARSEST_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "coarsest level of {} dofs is too large for a dense factorization",
            current.nrows()
        )));
    }
    let coarsest = coarsest_factorize(&current)?;
    levels.push(Level {
        kind: LevelKind::Coarsest,
        order: if h_levels == 0 { order } else { None },
        a: current,
        prolongation: None,
        restriction: None,
        smoother: None,
    });
    Ok(Hierarchy { levels, coarsest })
}

/// Per-level scratch vectors for one V-cycle caller.
#[derive(Debug, Clone)]
pub struct VcycleWorkspace {
    levels: Vec<LevelWork>,
}

#[derive(Debug, Clone)]
struct LevelWork {
    r: Vec<f64>,
    cheb: ChebyshevWorkspace,
    coarse_b: Vec<f64>,
    coarse_x: Vec<f64>,
}

impl Hierarchy {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &SparseMatrix {
        &self.levels[0].a
    }

    pub fn coarsest(&self) -> &Level {
        self.levels.last().expect("hierarchy has at least one level")
    }

    pub fn coarsest_factorization(&self) -> &DenseLu {
        &self.coarsest
    }

    pub fn workspace(&self) -> VcycleWorkspace {
        let n = self.levels.len();
        let levels = (0..n.saturating_sub(1))
            .map(|l| {
                let size = self.levels[l].size();
                let coarse = self.levels[l + 1].size();
                LevelWork {
                    r: vec![0.0; size],
                    cheb: ChebyshevWorkspace::new(size),
                    coarse_b: vec![0.0; coarse],
                    coarse_x: vec![0.0; coarse],
                }
            })
            .collect();
        VcycleWorkspace { levels }
    }

    /// One V-cycle from `level` down, improving `x` for `A_level x = b`.
    pub fn vcycle(
        &self,
        level: usize,
        b: &[f64],
        x: &mut [f64],
        ws: &mut VcycleWorkspace,
        timings: &mut Timings,
    ) -> Result<()> {
        let Some(lvl) = self.levels.get(level) else {
            return Err(Error::InvalidArgument(format!(
                "level {level} of a {}-level hierarchy",
                self.levels.len()
            )));
        };
        for len in [b.len(), x.len()] {
            if len != lvl.size() {
                return Err(Error::DimensionMismatch {
                    op: "vcycle",
                    expected: lvl.size(),
                    found: len,
                });
            }
        }
        let start = Instant::now();
        let from = level.min(ws.levels.len());
        self.cycle(level, b, x, false, &mut ws.levels[from..], timings);
        timings.vcycle += start.elapsed();
        timings.vcycles += 1;
        Ok(())
    }

    /// Applies one V-cycle to `b` from a zero initial guess: the
    /// preconditioner `z = M^-1 b`.
    pub fn apply(&self, b: &[f64], z: &mut [f64], ws: &mut VcycleWorkspace, timings: &mut Timings) {
        let start = Instant::now();
        self.cycle(0, b, z, true, &mut ws.levels, timings);
        timings.vcycle += start.elapsed();
        timings.vcycles += 1;
    }

    fn cycle(
        &self,
        l: usize,
        b: &[f64],
        x: &mut [f64],
        zero_guess: bool,
        ws: &mut [LevelWork],
        t: &mut Timings,
    ) {
        let level = &self.levels[l];
        if level.kind == LevelKind::Coarsest {
            timed(&mut t.coarsest_solve, || {
                if zero_guess {
                    self.coarsest.solve_into(b, x);
                } else {
                    // x += A^-1 (b - A x)
                    let mut r = vec![0.0; b.len()];
                    level.a.residual_into(b, x, &mut r);
                    let mut e = vec![0.0; b.len()];
                    self.coarsest.solve_into(&r, &mut e);
                    x.iter_mut().zip(&e).for_each(|(xi, ei)| *xi += ei);
                }
            });
            return;
        }
        let (work, rest) = ws.split_first_mut().expect("workspace matches hierarchy");
        let smoother = level.smoother.as_ref().expect("non-coarsest level has a smoother");
        let p = level.prolongation.as_ref().expect("non-coarsest level has P");
        let r = level.restriction.as_ref().expect("non-coarsest level has R");

        let smooth_start = Instant::now();
        chebyshev_smooth_with(&level.a, smoother, b, x, zero_guess, &mut work.cheb);
        let elapsed = smooth_start.elapsed();
        t.smooth += elapsed;
        if l == 0 {
            t.first_level_smooth += elapsed;
        }

        timed(&mut t.residual, || level.a.residual_into(b, x, &mut work.r));
        timed(&mut t.transfer, || r.mul_vec_into(&work.r, &mut work.coarse_b));

        self.cycle(l + 1, &work.coarse_b, &mut work.coarse_x, true, rest, t);

        timed(&mut t.transfer, || p.mul_vec_add(&work.coarse_x, x));

        let smooth_start = Instant::now();
        chebyshev_smooth_with(&level.a, smoother, b, x, false, &mut work.cheb);
        let elapsed = smooth_start.elapsed();
        t.smooth += elapsed;
        if l == 0 {
            t.first_level_smooth += elapsed;
        }
    }

    /// One `level kind order size nnz nnz_per_row` line per level.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (i, lvl) in self.levels.iter().enumerate() {
            let kind = match lvl.kind {
                LevelKind::P => "p",
                LevelKind::H => "h",
                LevelKind::Coarsest => "coarsest",
            };
            let order = lvl.order.map_or("-".to_string(), |o| o.to_string());
            out.push_str(&format!(
                "{i} {kind} {order} {} {} {:.2}\n",
                lvl.size(),
                lvl.nnz(),
                lvl.a.nnz_per_row()
            ));
        }
        out
    }
}
