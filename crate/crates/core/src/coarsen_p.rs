//! p-coarsening: order schedules and injection prolongation between two
//! polynomial orders on the same mesh.

use crate::dofmaps::{
    dof_next, extract_next_dof, g2u_next, l2g_next, CoarseSelection, GlobalToUniversalMap,
    LocalToGlobalMap,
};
use crate::error::{Error, Result};
use crate::sparse::{coo_to_csr, CooTriplet, SparseMatrix};

/// Strictly decreasing polynomial orders, finest first, ending at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PCoarsenPlan {
    orders: Vec<usize>,
}

impl PCoarsenPlan {
    pub fn new(orders: Vec<usize>) -> Result<Self> {
        if orders.last() != Some(&1) {
            return Err(Error::InvalidArgument(format!(
                "order plan {orders:?} must end at 1"
            )));
        }
        if orders.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "order plan {orders:?} is not strictly decreasing"
            )));
        }
        Ok(Self { orders })
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    /// Consecutive `(fine, coarse)` order pairs.
    pub fn steps(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.orders.windows(2).map(|w| (w[0], w[1]))
    }
}

/// How the p-levels are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PSchedule {
    /// Lower the order by a fixed amount, clamping the last step to 1.
    Stride(usize),
    /// Halve the order each level (`p -> p / 2`, at least 1).
    Halve,
    /// Explicit orders, finest first.
    Explicit(Vec<usize>),
}

impl Default for PSchedule {
    fn default() -> Self {
        PSchedule::Stride(1)
    }
}

impl PSchedule {
    pub fn plan(&self, p_start: usize) -> Result<PCoarsenPlan> {
        match self {
            PSchedule::Stride(stride) => plan_orders(p_start, *stride),
            PSchedule::Halve => plan_halving(p_start),
            PSchedule::Explicit(orders) => {
                if orders.first() != Some(&p_start) {
                    return Err(Error::InvalidArgument(format!(
                        "order plan {orders:?} does not start at the system order {p_start}"
                    )));
                }
                PCoarsenPlan::new(orders.clone())
            }
        }
    }
}

/// Descending orders `p, p - s, p - 2s, ...`, with the final entry clamped to 1.
pub fn plan_orders(p_start: usize, stride: usize) -> Result<PCoarsenPlan> {
    if p_start == 0 || stride == 0 {
        return Err(Error::InvalidArgument(format!(
            "p_start = {p_start} and stride = {stride} must both be >= 1"
        )));
    }
    let mut orders = vec![p_start];
    let mut p = p_start;
    while p > 1 {
        p = p.saturating_sub(stride).max(1);
        orders.push(p);
    }
    PCoarsenPlan::new(orders)
}

/// `p, p/2, p/4, ..., 1`.
pub fn plan_halving(p_start: usize) -> Result<PCoarsenPlan> {
    if p_start == 0 {
        return Err(Error::InvalidArgument("p_start must be >= 1".into()));
    }
    let mut orders = vec![p_start];
    let mut p = p_start;
    while p > 1 {
        p = (p / 2).max(1);
        orders.push(p);
    }
    PCoarsenPlan::new(orders)
}

/// Injection prolongation from the coarse order back to the fine order.
///
/// Rows are fine universal dofs and columns coarse universal dofs; each
/// retained mode contributes a single 1.0, repeated contributions from
/// elements sharing a dof collapse to one entry.
pub fn build_p_prolongation(
    l2g_fine: &LocalToGlobalMap,
    l2g_coarse: &LocalToGlobalMap,
    g2u_fine: &GlobalToUniversalMap,
    g2u_coarse: &GlobalToUniversalMap,
    sel: &CoarseSelection,
) -> Result<SparseMatrix> {
    let (p_fine, p_coarse) = (l2g_fine.order(), l2g_coarse.order());
    if l2g_fine.n_elements() != l2g_coarse.n_elements() {
        return Err(Error::MapInconsistency(format!(
            "fine map has {} elements, coarse map {}",
            l2g_fine.n_elements(),
            l2g_coarse.n_elements()
        )));
    }
    if g2u_fine.len() < l2g_fine.n_dofs() || g2u_coarse.len() < l2g_coarse.n_dofs() {
        return Err(Error::MapInconsistency(
            "g2u map shorter than the dof count of its l2g map".into(),
        ));
    }
    let mut coo = Vec::with_capacity(l2g_coarse.n_elements() * l2g_coarse.row(0).len());
    for (e, (fine_row, coarse_row)) in l2g_fine.rows().zip(l2g_coarse.rows()).enumerate() {
        let dc = extract_next_dof(fine_row, p_fine, p_coarse)?;
        for (&fine, &coarse) in dc.iter().zip(coarse_row) {
            if sel.coarse_index(fine) != Some(coarse) {
                return Err(Error::MapInconsistency(format!(
                    "element {e}: fine dof {fine} and coarse dof {coarse} disagree with the selection"
                )));
            }
            coo.push(CooTriplet::new(g2u_fine.get(fine), g2u_coarse.get(coarse), 1.0));
        }
    }
    coo_to_csr(&coo, g2u_fine.len(), g2u_coarse.len())
}

/// Maps and prolongation for one p-coarsening step.
#[derive(Debug, Clone)]
pub struct PLevelTransfer {
    pub l2g: LocalToGlobalMap,
    pub g2u: GlobalToUniversalMap,
    pub prolongation: SparseMatrix,
}

/// Runs the whole map reconstruction for one step `l2g.order() -> p_coarse`.
pub fn coarsen_p_level(
    l2g: &LocalToGlobalMap,
    g2u: &GlobalToUniversalMap,
    p_coarse: usize,
) -> Result<PLevelTransfer> {
    let sel = dof_next(l2g, p_coarse)?;
    let l2g_c = l2g_next(l2g, &sel, p_coarse)?;
    let g2u_c = g2u_next(&l2g_c, &sel, g2u)?;
    let prolongation = build_p_prolongation(l2g, &l2g_c, g2u, &g2u_c, &sel)?;
    Ok(PLevelTransfer {
        l2g: l2g_c,
        g2u: g2u_c,
        prolongation,
    })
}
