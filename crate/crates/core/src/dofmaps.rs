//! Local-to-global (`l2g`) and global-to-universal (`g2u`) dof maps, and
//! their reconstruction on each p-coarsened level.
//!
//! An `l2g` row lists the process dofs of one hexahedral element in modal
//! tensor order: entry `(p+1)^2 i + (p+1) j + k` carries the basis function
//! `phi_i(x) phi_j(y) phi_k(z)`. Lowering the order to `q` therefore keeps the
//! entries with `i, j, k <= q`, independent of how the finite element library
//! numbered its process dofs.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fem::elemental_dof_index;

/// Per-element process dof lists for one polynomial order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalToGlobalMap {
    order: usize,
    n_dofs: usize,
    entries: Vec<usize>,
}

impl LocalToGlobalMap {
    /// Builds and validates a map from a flat, element-major entry list.
    pub fn new(order: usize, entries: Vec<usize>) -> Result<Self> {
        if order == 0 {
            return Err(Error::MapInconsistency("l2g order must be at least 1".into()));
        }
        let per = dofs_per_element(order);
        if entries.len() % per != 0 {
            return Err(Error::MapInconsistency(format!(
                "{} entries is not a multiple of (p+1)^3 = {per}",
                entries.len()
            )));
        }
        let n_dofs = entries.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_dofs];
        for &d in &entries {
            seen[d] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::MapInconsistency(format!(
                "process dof {missing} does not appear in any element"
            )));
        }
        Ok(Self {
            order,
            n_dofs,
            entries,
        })
    }

    pub fn from_rows(order: usize, rows: &[Vec<usize>]) -> Result<Self> {
        let per = dofs_per_element(order);
        if let Some((e, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != per) {
            return Err(Error::MapInconsistency(format!(
                "element {e} has {} dofs, expected {per}",
                r.len()
            )));
        }
        Self::new(order, rows.concat())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_elements(&self) -> usize {
        self.entries.len() / dofs_per_element(self.order)
    }

    /// Number of distinct process dofs referenced.
    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn row(&self, element: usize) -> &[usize] {
        let per = dofs_per_element(self.order);
        &self.entries[element * per..(element + 1) * per]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.entries.chunks(dofs_per_element(self.order))
    }
}

/// Process dof index to universal dof index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalToUniversalMap {
    values: Vec<usize>,
}

impl GlobalToUniversalMap {
    pub fn new(values: Vec<usize>) -> Result<Self> {
        let mut sorted = values.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::MapInconsistency(format!(
                "universal index {} assigned twice",
                w[0]
            )));
        }
        Ok(Self { values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            values: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, process_dof: usize) -> usize {
        self.values[process_dof]
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    /// True when the values are exactly `0..len` in some order, which is what
    /// a single-process run requires.
    pub fn is_permutation(&self) -> bool {
        self.values.iter().all(|&v| v < self.values.len())
    }
}

/// Fine dofs that survive to the coarse level, and their coarse numbering.
#[derive(Debug, Clone)]
pub struct CoarseSelection {
    collect: Vec<usize>,
    hash_l2g: HashMap<usize, usize>,
}

impl CoarseSelection {
    /// Sorted, deduplicated fine process dofs kept at the coarse level.
    pub fn collect(&self) -> &[usize] {
        &self.collect
    }

    pub fn len(&self) -> usize {
        self.collect.len()
    }

    pub fn is_empty(&self) -> bool {
        self.collect.is_empty()
    }

    /// Coarse process index of a fine process dof, if retained.
    pub fn coarse_index(&self, fine_dof: usize) -> Option<usize> {
        self.hash_l2g.get(&fine_dof).copied()
    }
}

pub fn dofs_per_element(order: usize) -> usize {
    (order + 1).pow(3)
}

/// Positions inside a fine element row that survive lowering the order from
/// `p_fine` to `p_coarse`, in `i, j, k` loop order.
pub fn retained_positions(p_fine: usize, p_coarse: usize) -> Result<Vec<usize>> {
    if p_coarse == 0 || p_coarse >= p_fine {
        return Err(Error::InvalidArgument(format!(
            "coarse order {p_coarse} must satisfy 1 <= p_coarse < p_fine = {p_fine}"
        )));
    }
    let mut out = Vec::with_capacity(dofs_per_element(p_coarse));
    for i in 0..=p_coarse {
        for j in 0..=p_coarse {
            for k in 0..=p_coarse {
                out.push(elemental_dof_index(i, j, k, p_fine)?);
            }
        }
    }
    Ok(out)
}

/// Entries of one element's dof row that remain at order `p_coarse`.
pub fn extract_next_dof(row: &[usize], p_fine: usize, p_coarse: usize) -> Result<Vec<usize>> {
    if row.len() != dofs_per_element(p_fine) {
        return Err(Error::DimensionMismatch {
            op: "extract_next_dof",
            expected: dofs_per_element(p_fine),
            found: row.len(),
        });
    }
    Ok(retained_positions(p_fine, p_coarse)?
        .into_iter()
        .map(|pos| row[pos])
        .collect())
}

/// Collects every fine dof retained at order `p_coarse` and numbers them by
/// sorted position.
pub fn dof_next(l2g: &LocalToGlobalMap, p_coarse: usize) -> Result<CoarseSelection> {
    let positions = retained_positions(l2g.order(), p_coarse)?;
    let mut collect: Vec<usize> = l2g
        .rows()
        .flat_map(|row| positions.iter().map(move |&pos| row[pos]))
        .collect();
    collect.sort_unstable();
    collect.dedup();
    let hash_l2g = collect.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    Ok(CoarseSelection { collect, hash_l2g })
}

/// Coarse-level `l2g`: each element keeps its row, relabelled through the
/// selection's numbering.
pub fn l2g_next(
    l2g: &LocalToGlobalMap,
    sel: &CoarseSelection,
    p_coarse: usize,
) -> Result<LocalToGlobalMap> {
    let positions = retained_positions(l2g.order(), p_coarse)?;
    let mut entries = Vec::with_capacity(l2g.n_elements() * positions.len());
    for (e, row) in l2g.rows().enumerate() {
        for &pos in &positions {
            let fine = row[pos];
            let coarse = sel.coarse_index(fine).ok_or_else(|| {
                Error::MapInconsistency(format!(
                    "element {e}: retained dof {fine} missing from the coarse selection"
                ))
            })?;
            entries.push(coarse);
        }
    }
    LocalToGlobalMap::new(p_coarse, entries)
}

/// Coarse-level `g2u`. With a single process the universal collect is the
/// image of the local collect under `g2u`, so no exchange is needed.
pub fn g2u_next(
    l2g_next: &LocalToGlobalMap,
    sel: &CoarseSelection,
    g2u: &GlobalToUniversalMap,
) -> Result<GlobalToUniversalMap> {
    let mut collect_univ = Vec::with_capacity(sel.len());
    for &fine in sel.collect() {
        if fine >= g2u.len() {
            return Err(Error::MapInconsistency(format!(
                "fine dof {fine} outside g2u of length {}",
                g2u.len()
            )));
        }
        collect_univ.push(g2u.get(fine));
    }
    collect_univ.sort_unstable();
    collect_univ.dedup();
    let hash_g2u: HashMap<usize, usize> = collect_univ
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, i))
        .collect();

    let mut next = vec![usize::MAX; sel.len()];
    for row in l2g_next.rows() {
        for &coarse_glb in row {
            let fine_glb = *sel.collect().get(coarse_glb).ok_or_else(|| {
                Error::MapInconsistency(format!("coarse dof {coarse_glb} outside collect"))
            })?;
            let fine_univ = g2u.get(fine_glb);
            next[coarse_glb] = hash_g2u[&fine_univ];
        }
    }
    if let Some(missing) = next.iter().position(|&v| v == usize::MAX) {
        return Err(Error::MapInconsistency(format!(
            "coarse dof {missing} not reached by any element"
        )));
    }
    GlobalToUniversalMap::new(next)
}
