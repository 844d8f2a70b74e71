//! Geometrically informed algebraic multigrid for high-order finite element
//! systems.
//!
//! The preconditioner first lowers the polynomial order inside each element
//! (p-coarsening with injection, driven by the element-to-dof maps), then
//! switches to smoothed aggregation once the operator is trilinear, and
//! finishes with a dense direct solve. It is applied as one V-cycle per
//! conjugate gradient iteration.
//!
//! ```no_run
//! use giamg::{assemble_helmholtz, solve_with, BoundaryPolicy, HexMesh, SolveOptions};
//!
//! let mesh = HexMesh::unit_cube(2)?;
//! let sys = assemble_helmholtz(&mesh, 6, 1.0, BoundaryPolicy::Penalty)?;
//! let opts = SolveOptions::default();
//! let hierarchy = sys.hierarchy(&opts)?;
//! let (x, log) = solve_with(&sys.a, &sys.b, Some(&hierarchy), &opts)?;
//! println!("{} iterations, u(1/2) = {}", log.iterations, sys.evaluate(&x, [0.5; 3])?);
//! # Ok::<(), giamg::Error>(())
//! ```

pub mod coarsen_h;
pub mod coarsen_p;
pub mod dofmaps;
pub mod error;
pub mod fem;
pub mod hierarchy;
pub mod io;
pub mod krylov;
pub mod lu;
pub mod smoothers;
pub mod sparse;
pub mod timing;

pub use coarsen_p::{plan_orders, PCoarsenPlan, PSchedule};
pub use dofmaps::{GlobalToUniversalMap, LocalToGlobalMap};
pub use error::{Error, Result};
pub use fem::{assemble_helmholtz, AssembledSystem, BoundaryPolicy, HexMesh};
pub use hierarchy::{setup, Hierarchy, Level, LevelKind, PreconditionerKind, SolveOptions};
pub use krylov::{pcg_solve, solve_with, ConvergenceLog};
pub use sparse::{CooTriplet, SparseMatrix};
pub use timing::Timings;
