//! Smoothed-aggregation coarsening used once the operator is at order one:
//! strength of connection, greedy MIS aggregation, tentative prolongation and
//! its smoothing.

use crate::error::{Error, Result};
use crate::sparse::{coo_to_csr, coo_to_csr_summed, matmul, CooTriplet, SparseMatrix};

/// Strong off-diagonal couplings. Values hold the normalized strength
/// `|a_ij| / sqrt(|a_ii a_jj|)`.
#[derive(Debug, Clone)]
pub struct StrengthGraph {
    adjacency: SparseMatrix,
    theta: f64,
}

impl StrengthGraph {
    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn neighbors(&self, i: usize) -> (&[usize], &[f64]) {
        self.adjacency.row(i)
    }

    /// Graph from an explicit undirected edge list with unit strength.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut coo = Vec::with_capacity(2 * edges.len());
        for &(i, j) in edges {
            if i != j {
                coo.push(CooTriplet::new(i, j, 1.0));
                coo.push(CooTriplet::new(j, i, 1.0));
            }
        }
        Ok(Self {
            adjacency: coo_to_csr(&coo, n, n)?,
            theta: 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregation {
    assignment: Vec<usize>,
    n_aggregates: usize,
    roots: Vec<usize>,
}

impl Aggregation {
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn n_aggregates(&self) -> usize {
        self.n_aggregates
    }

    /// Root dof of each aggregate, indexed by aggregate id.
    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Members of each aggregate in ascending dof order.
    pub fn aggregates(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_aggregates];
        for (dof, &agg) in self.assignment.iter().enumerate() {
            out[agg].push(dof);
        }
        out
    }
}

/// How the tentative prolongation is smoothed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProlongationSmoother {
    /// `P = (I - omega D^-1 A) T`.
    Jacobi { omega: f64 },
    /// `P = (I - M A) T` with the diagonal sparse approximate inverse
    /// `m_ii = a_ii / sum_j a_ij^2`.
    Spai0,
}

impl Default for ProlongationSmoother {
    fn default() -> Self {
        ProlongationSmoother::Jacobi { omega: 2.0 / 3.0 }
    }
}

/// Keeps `(i, j)` when `|a_ij| >= theta sqrt(|a_ii a_jj|)`. The pattern is
/// symmetrized so tiny asymmetries in `A` cannot produce one-way edges.
pub fn strength_graph(a: &SparseMatrix, theta: f64) -> Result<StrengthGraph> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "strength_graph",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta = {theta} outside [0, 1)")));
    }
    let diag = a.diagonal();
    if let Some(row) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal { row });
    }
    let mut coo = Vec::new();
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if i == j {
                continue;
            }
            let scale = (diag[i].abs() * diag[j].abs()).sqrt();
            if v.abs() >= theta * scale {
                let s = v.abs() / scale;
                coo.push(CooTriplet::new(i, j, s));
                coo.push(CooTriplet::new(j, i, s));
            }
        }
    }
    // Both directions were pushed; keep-first leaves one entry per pair.
    Ok(StrengthGraph {
        adjacency: coo_to_csr(&coo, a.nrows(), a.nrows())?,
        theta,
    })
}

/// Greedy MIS aggregation in ascending dof order.
///
/// A dof not adjacent to an existing root becomes a root; every other dof
/// joins the adjacent root it is most strongly connected to (lowest root on
/// ties). `_seed` is reserved for randomized orderings.
pub fn mis_aggregate(g: &StrengthGraph, _seed: u64) -> Aggregation {
    let n = g.n_vertices();
    let mut agg_of_root = vec![usize::MAX; n];
    let mut blocked = vec![false; n];
    let mut roots = Vec::new();
    for i in 0..n {
        if blocked[i] {
            continue;
        }
        agg_of_root[i] = roots.len();
        roots.push(i);
        blocked[i] = true;
        for &j in g.neighbors(i).0 {
            blocked[j] = true;
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for (id, &r) in roots.iter().enumerate() {
        assignment[r] = id;
    }
    for i in 0..n {
        if assignment[i] != usize::MAX {
            continue;
        }
        let (cols, vals) = g.neighbors(i);
        let mut best: Option<(f64, usize)> = None;
        for (&j, &s) in cols.iter().zip(vals) {
            if agg_of_root[j] == usize::MAX {
                continue;
            }
            if best.is_none_or(|(bs, br)| s > bs || (s == bs && j < br)) {
                best = Some((s, j));
            }
        }
        if let Some((_, r)) = best {
            assignment[i] = agg_of_root[r];
        }
    }
    // Anything still unassigned (only possible with a one-way edge) joins its
    // strongest assigned neighbour, or starts its own aggregate.
    for i in 0..n {
        if assignment[i] != usize::MAX {
            continue;
        }
        let (cols, vals) = g.neighbors(i);
        let pick = cols
            .iter()
            .zip(vals)
            .filter(|(&j, _)| assignment[j] != usize::MAX)
            .fold(None::<(f64, usize)>, |best, (&j, &s)| match best {
                Some((bs, _)) if bs >= s => best,
                _ => Some((s, j)),
            });
        assignment[i] = match pick {
            Some((_, j)) => assignment[j],
            None => {
                roots.push(i);
                roots.len() - 1
            }
        };
    }
    Aggregation {
        assignment,
        n_aggregates: roots.len(),
        roots,
    }
}

/// Piecewise-constant prolongation: `T[i, agg(i)] = 1`.
pub fn tentative_prolongation(agg: &Aggregation) -> SparseMatrix {
    let n = agg.assignment.len();
    SparseMatrix::from_csr(
        n,
        agg.n_aggregates,
        (0..=n).collect(),
        agg.assignment.clone(),
        vec![1.0; n],
    )
    .expect("aggregation ids are dense")
}

/// Jacobi-smoothed prolongation `(I - omega D^-1 A) T`.
pub fn smooth_prolongation(a: &SparseMatrix, t: &SparseMatrix, omega: f64) -> Result<SparseMatrix> {
    let diag = a.diagonal();
    if let Some(row) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal { row });
    }
    let scale: Vec<f64> = diag.iter().map(|d| omega / d).collect();
    subtract_row_scaled_product(a, t, &scale)
}

/// SPAI-0 smoothed prolongation `(I - M A) T`.
pub fn smooth_prolongation_spai0(a: &SparseMatrix, t: &SparseMatrix) -> Result<SparseMatrix> {
    let mut scale = Vec::with_capacity(a.nrows());
    for i in 0..a.nrows() {
        let (_, vals) = a.row(i);
        let norm2: f64 = vals.iter().map(|v| v * v).sum();
        let d = a.get(i, i);
        if d == 0.0 {
            return Err(Error::ZeroDiagonal { row: i });
        }
        scale.push(d / norm2);
    }
    subtract_row_scaled_product(a, t, &scale)
}

/// `T - diag(scale) A T`.
fn subtract_row_scaled_product(
    a: &SparseMatrix,
    t: &SparseMatrix,
    scale: &[f64],
) -> Result<SparseMatrix> {
    if a.ncols() != t.nrows() || a.nrows() != t.nrows() {
        return Err(Error::DimensionMismatch {
            op: "smooth_prolongation",
            expected: a.ncols(),
            found: t.nrows(),
        });
    }
    let at = matmul(a, t)?;
    let mut coo: Vec<CooTriplet> = t.triplets().collect();
    coo.extend(
        at.triplets()
            .map(|c| CooTriplet::new(c.row, c.col, -scale[c.row] * c.value)),
    );
    coo_to_csr_summed(&coo, t.nrows(), t.ncols())
}

/// Parameters for one smoothed-aggregation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HCoarsenOptions {
    pub theta: f64,
    pub smoother: ProlongationSmoother,
    pub seed: u64,
}

impl Default for HCoarsenOptions {
    fn default() -> Self {
        Self {
            theta: 0.25,
            smoother: ProlongationSmoother::default(),
            seed: 0,
        }
    }
}

/// Smoothed prolongation for `a`, or `None` when aggregation makes no
/// progress (every dof its own aggregate).
pub fn coarsen_h_level(a: &SparseMatrix, opts: &HCoarsenOptions) -> Result<Option<SparseMatrix>> {
    let g = strength_graph(a, opts.theta)?;
    let agg = mis_aggregate(&g, opts.seed);
    if agg.n_aggregates() >= a.nrows() {
        return Ok(None);
    }
    let t = tentative_prolongation(&agg);
    let p = match opts.smoother {
        ProlongationSmoother::Jacobi { omega } => smooth_prolongation(a, &t, omega)?,
        ProlongationSmoother::Spai0 => smooth_prolongation_spai0(a, &t)?,
    };
    Ok(Some(p))
}
