//! `giamg`: assemble, solve and profile high-order Helmholtz systems.
//!
//! Exit status: 0 converged (or nothing to solve), 2 not converged, 3 bad
//! input, 1 numerical failure inside the solver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use giamg::dofmaps::{GlobalToUniversalMap, LocalToGlobalMap};
use giamg::fem::manufactured_solution;
use giamg::hierarchy::DofMaps;
use giamg::{
    assemble_helmholtz, io, setup, solve_with, AssembledSystem, BoundaryPolicy, ConvergenceLog,
    Hierarchy, HexMesh, PSchedule, PreconditionerKind, SolveOptions, SparseMatrix, Timings,
};
use log::{info, warn};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "giamg", version, about = "GIAMG-preconditioned CG for high-order hexahedral Helmholtz systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble the manufactured Helmholtz problem and write A.mtx, b.vec,
    /// exact.vec, map.l2g and map.g2u.
    Assemble {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Solve a generated or imported system with PCG.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        import: ImportArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Writes x.vec, convergence.csv and timings.txt here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write timings.json (requires --out-dir).
        #[arg(long, requires = "out_dir")]
        json: bool,
    },
    /// Print `level kind order size nnz nnz_per_row` for every level.
    HierarchyInfo {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        import: ImportArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Time V-cycle phases and full solves, optionally sweeping settings.
    Bench {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        import: ImportArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 2)]
        warmup: usize,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// One row per smoothing count 1..=4.
        #[arg(long)]
        smooth_sweep: bool,
        /// One row each for p-stride 1 and 2.
        #[arg(long)]
        stride_sweep: bool,
        /// Writes bench.csv (and bench.json with --json) here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, requires = "out_dir")]
        json: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct ProblemArgs {
    /// Elements per direction of the unit cube.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Polynomial order.
    #[arg(long, default_value_t = 8)]
    p: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = Bc::Penalty)]
    bc: Bc,
}

#[derive(Args, Debug, Clone)]
struct ImportArgs {
    /// Matrix Market operator; replaces the generated problem.
    #[arg(long, requires = "rhs")]
    matrix: Option<PathBuf>,
    #[arg(long, requires = "matrix")]
    rhs: Option<PathBuf>,
    /// Element dof map; needed for p-coarsening of imported systems.
    #[arg(long, requires = "matrix")]
    l2g: Option<PathBuf>,
    /// Universal numbering; identity when omitted.
    #[arg(long, requires = "l2g")]
    g2u: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 2)]
    smooth_iters: usize,
    /// Lower the order by this much per p-level.
    #[arg(long, conflicts_with_all = ["p_halve", "p_orders"])]
    p_stride: Option<usize>,
    /// Halve the order per p-level (8, 4, 2, 1).
    #[arg(long, conflicts_with = "p_orders")]
    p_halve: bool,
    /// Explicit order sequence, e.g. 8,5,3,1.
    #[arg(long, value_delimiter = ',')]
    p_orders: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.25)]
    theta: f64,
    #[arg(long, default_value_t = 1000)]
    coarsest_max: usize,
    #[arg(long, default_value_t = 6)]
    max_h_levels: usize,
    #[arg(long, value_enum, default_value_t = Precond::Giamg)]
    precond: Precond,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Bc {
    Penalty,
    Eliminate,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Precond {
    Giamg,
    Diag,
    None,
}

impl SolverArgs {
    fn options(&self) -> SolveOptions {
        let p_schedule = if let Some(orders) = &self.p_orders {
            PSchedule::Explicit(orders.clone())
        } else if self.p_halve {
            PSchedule::Halve
        } else {
            PSchedule::Stride(self.p_stride.unwrap_or(1))
        };
        SolveOptions {
            rtol: self.rtol,
            max_iters: self.max_iters,
            smooth_iters: self.smooth_iters,
            p_schedule,
            theta: self.theta,
            coarsest_max_size: self.coarsest_max,
            max_h_levels: self.max_h_levels,
            preconditioner: match self.precond {
                Precond::Giamg => PreconditionerKind::Giamg,
                Precond::Diag => PreconditionerKind::Diagonal,
                Precond::None => PreconditionerKind::None,
            },
            seed: self.seed,
            ..SolveOptions::default()
        }
    }
}

enum Problem {
    Generated(AssembledSystem),
    Imported {
        a: SparseMatrix,
        b: Vec<f64>,
        maps: Option<(LocalToGlobalMap, GlobalToUniversalMap)>,
    },
}

impl Problem {
    fn load(problem: &ProblemArgs, import: &ImportArgs) -> Result<Self> {
        let Some(matrix) = &import.matrix else {
            let sys = generate(problem)?;
            return Ok(Problem::Generated(sys));
        };
        let rhs = import.rhs.as_ref().context("--matrix needs --rhs")?;
        let a = io::read_matrix_market(matrix)?;
        let b = io::read_vector(rhs)?;
        if b.len() != a.nrows() {
            bail!(giamg::Error::DimensionMismatch {
                op: "right-hand side length",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        let maps = match &import.l2g {
            Some(path) => {
                let l2g = io::read_l2g(path)?;
                let g2u = match &import.g2u {
                    Some(g) => io::read_g2u(g)?,
                    None => GlobalToUniversalMap::identity(l2g.n_dofs()),
                };
                Some((l2g, g2u))
            }
            None => None,
        };
        info!("imported {}x{} operator with {} nonzeros", a.nrows(), a.ncols(), a.nnz());
        Ok(Problem::Imported { a, b, maps })
    }

    fn a(&self) -> &SparseMatrix {
        match self {
            Problem::Generated(s) => &s.a,
            Problem::Imported { a, .. } => a,
        }
    }

    fn b(&self) -> &[f64] {
        match self {
            Problem::Generated(s) => &s.b,
            Problem::Imported { b, .. } => b,
        }
    }

    fn maps(&self) -> Option<DofMaps<'_>> {
        match self {
            Problem::Generated(s) => Some(s.dof_maps()),
            Problem::Imported { maps, .. } => maps.as_ref().map(|(l2g, g2u)| DofMaps {
                order: l2g.order(),
                l2g,
                g2u,
            }),
        }
    }

    fn hierarchy(&self, opts: &SolveOptions) -> Result<(Hierarchy, Duration)> {
        let start = Instant::now();
        let h = setup(self.a(), self.maps(), opts)?;
        Ok((h, start.elapsed()))
    }
}

fn generate(args: &ProblemArgs) -> Result<AssembledSystem> {
    let mesh = HexMesh::unit_cube(args.n)?;
    let bc = match args.bc {
        Bc::Penalty => BoundaryPolicy::Penalty,
        Bc::Eliminate => BoundaryPolicy::Eliminate,
    };
    let start = Instant::now();
    let sys = assemble_helmholtz(&mesh, args.p, args.lambda, bc)?;
    info!(
        "assembled n={} p={}: {} dofs, {} nonzeros in {:.3?}",
        args.n,
        args.p,
        sys.n_dofs(),
        sys.a.nnz(),
        start.elapsed()
    );
    Ok(sys)
}

fn cmd_assemble(problem: &ProblemArgs, out_dir: &Path) -> Result<()> {
    let sys = generate(problem)?;
    std::fs::create_dir_all(out_dir).map_err(|e| giamg::Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    io::write_matrix_market(&out_dir.join("A.mtx"), &sys.a)?;
    io::write_vector(&out_dir.join("b.vec"), &sys.b)?;
    io::write_vector(&out_dir.join("exact.vec"), &sys.exact_coeffs)?;
    io::write_l2g(&out_dir.join("map.l2g"), &sys.l2g)?;
    io::write_g2u(&out_dir.join("map.g2u"), &sys.g2u)?;
    println!("dofs = {}", sys.n_dofs());
    println!("nnz = {}", sys.a.nnz());
    println!("elements = {}", sys.l2g.n_elements());
    println!("order = {}", sys.order);
    Ok(())
}

/// Largest pointwise error at the 27 interior points `(i, j, k) / 4`.
fn sample_error(sys: &AssembledSystem, x: &[f64]) -> Result<f64> {
    let mut err: f64 = 0.0;
    for i in 1..=3 {
        for j in 1..=3 {
            for k in 1..=3 {
                let pt = [0.25 * i as f64, 0.25 * j as f64, 0.25 * k as f64];
                err = err.max((sys.evaluate(x, pt)? - manufactured_solution(pt)).abs());
            }
        }
    }
    Ok(err)
}

fn timings_json(t: &Timings, log: &ConvergenceLog, levels: usize) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (k, v) in t.entries() {
        map.insert(k.to_string(), json!(v));
    }
    map.insert("iterations".into(), json!(t.iterations));
    map.insert("vcycles".into(), json!(t.vcycles));
    map.insert("converged".into(), json!(log.converged));
    map.insert("final_relres".into(), json!(log.final_relres()));
    map.insert("levels".into(), json!(levels));
    serde_json::Value::Object(map)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| giamg::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn cmd_solve(
    problem: &Problem,
    solver: &SolverArgs,
    out_dir: Option<&Path>,
    json: bool,
) -> Result<bool> {
    let opts = solver.options();
    let hierarchy = match opts.preconditioner {
        PreconditionerKind::Giamg => Some(problem.hierarchy(&opts)?),
        _ => None,
    };
    let (x, mut log) = solve_with(problem.a(), problem.b(), hierarchy.as_ref().map(|h| &h.0), &opts)?;
    let levels = hierarchy.as_ref().map_or(0, |h| h.0.n_levels());
    if let Some((_, setup_time)) = &hierarchy {
        log.timings.setup = *setup_time;
    }

    println!("converged = {}", log.converged);
    println!("iterations = {}", log.iterations);
    println!("final_relres = {:.6e}", log.final_relres());
    println!("levels = {levels}");
    if let Problem::Generated(sys) = problem {
        println!("max_error = {:.6e}", sample_error(sys, &x)?);
    }
    print!("{}", log.timings.to_key_value());

    if let Some(dir) = out_dir {
        create_dir(dir)?;
        io::write_vector(&dir.join("x.vec"), &x)?;
        io::write_atomic(&dir.join("convergence.csv"), &log.to_csv())?;
        io::write_atomic(&dir.join("timings.txt"), &log.timings.to_key_value())?;
        if json {
            let value = timings_json(&log.timings, &log, levels);
            io::write_atomic(
                &dir.join("timings.json"),
                &format!("{}\n", serde_json::to_string_pretty(&value)?),
            )?;
        }
    }
    if !log.converged {
        warn!(
            "not converged after {} iterations (relative residual {:e})",
            log.iterations,
            log.final_relres()
        );
    }
    Ok(log.converged)
}

fn cmd_hierarchy_info(problem: &Problem, solver: &SolverArgs) -> Result<()> {
    let (h, _) = problem.hierarchy(&solver.options())?;
    print!("{}", h.report());
    Ok(())
}

struct BenchRow {
    label: String,
    levels: usize,
    iterations: usize,
    converged: bool,
    setup: Duration,
    solve: Duration,
    /// Mean per V-cycle.
    vcycle: Timings,
}

fn bench_one(problem: &Problem, label: String, opts: &SolveOptions, warmup: usize, repeats: usize) -> Result<BenchRow> {
    let (h, setup_time) = problem.hierarchy(opts)?;
    let giamg = SolveOptions {
        preconditioner: PreconditionerKind::Giamg,
        ..opts.clone()
    };
    let (_, log) = solve_with(problem.a(), problem.b(), Some(&h), &giamg)?;

    let mut ws = h.workspace();
    let mut z = vec![0.0; problem.b().len()];
    let mut scratch = Timings::default();
    for _ in 0..warmup {
        h.apply(problem.b(), &mut z, &mut ws, &mut scratch);
    }
    let mut t = Timings::default();
    for _ in 0..repeats {
        h.apply(problem.b(), &mut z, &mut ws, &mut t);
    }
    let k = repeats.max(1) as u32;
    let mean = Timings {
        vcycle: t.vcycle / k,
        smooth: t.smooth / k,
        first_level_smooth: t.first_level_smooth / k,
        residual: t.residual / k,
        transfer: t.transfer / k,
        coarsest_solve: t.coarsest_solve / k,
        vcycles: t.vcycles,
        ..Timings::default()
    };
    Ok(BenchRow {
        label,
        levels: h.n_levels(),
        iterations: log.iterations,
        converged: log.converged,
        setup: setup_time,
        solve: log.timings.total_solve,
        vcycle: mean,
    })
}

const BENCH_HEADER: &str = "config,levels,iterations,converged,setup_s,solve_s,vcycle_s,smooth_s,first_level_smooth_s,residual_s,transfer_s,coarsest_s";

fn bench_csv_line(r: &BenchRow) -> String {
    let v = &r.vcycle;
    format!(
        "{},{},{},{},{:.6},{:.6},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
        r.label,
        r.levels,
        r.iterations,
        r.converged,
        r.setup.as_secs_f64(),
        r.solve.as_secs_f64(),
        v.vcycle.as_secs_f64(),
        v.smooth.as_secs_f64(),
        v.first_level_smooth.as_secs_f64(),
        v.residual.as_secs_f64(),
        v.transfer.as_secs_f64(),
        v.coarsest_solve.as_secs_f64(),
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    problem: &Problem,
    solver: &SolverArgs,
    warmup: usize,
    repeats: usize,
    smooth_sweep: bool,
    stride_sweep: bool,
    out_dir: Option<&Path>,
    json: bool,
) -> Result<bool> {
    if repeats == 0 {
        bail!(giamg::Error::InvalidArgument("--repeats must be at least 1".into()));
    }
    let base = solver.options();
    let mut configs = Vec::new();
    if smooth_sweep {
        for s in 1..=4 {
            configs.push((format!("smooth_iters={s}"), SolveOptions { smooth_iters: s, ..base.clone() }));
        }
    }
    if stride_sweep {
        for stride in [1, 2] {
            configs.push((format!("p_stride={stride}"), base.clone().with_p_stride(stride)));
        }
    }
    if configs.is_empty() {
        configs.push(("base".to_string(), base));
    }
    let mut rows = Vec::new();
    println!("{BENCH_HEADER}");
    for (label, opts) in configs {
        let row = bench_one(problem, label, &opts, warmup, repeats)?;
        println!("{}", bench_csv_line(&row));
        rows.push(row);
    }
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        let mut csv = format!("{BENCH_HEADER}\n");
        for r in &rows {
            csv.push_str(&bench_csv_line(r));
            csv.push('\n');
        }
        io::write_atomic(&dir.join("bench.csv"), &csv)?;
        if json {
            let value: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "config": r.label,
                        "levels": r.levels,
                        "iterations": r.iterations,
                        "converged": r.converged,
                        "setup": r.setup.as_secs_f64(),
                        "total_solve": r.solve.as_secs_f64(),
                        "vcycle": r.vcycle.vcycle.as_secs_f64(),
                        "smooth": r.vcycle.smooth.as_secs_f64(),
                        "first_level_smooth": r.vcycle.first_level_smooth.as_secs_f64(),
                        "residual": r.vcycle.residual.as_secs_f64(),
                        "transfer": r.vcycle.transfer.as_secs_f64(),
                        "coarsest_solve": r.vcycle.coarsest_solve.as_secs_f64(),
                    })
                })
                .collect();
            io::write_atomic(
                &dir.join("bench.json"),
                &format!("{}\n", serde_json::to_string_pretty(&value)?),
            )?;
        }
    }
    Ok(rows.iter().all(|r| r.converged))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Assemble { problem, out_dir } => cmd_assemble(&problem, &out_dir).map(|_| true),
        Command::Solve {
            problem,
            import,
            solver,
            out_dir,
            json,
        } => cmd_solve(&Problem::load(&problem, &import)?, &solver, out_dir.as_deref(), json),
        Command::HierarchyInfo {
            problem,
            import,
            solver,
        } => cmd_hierarchy_info(&Problem::load(&problem, &import)?, &solver).map(|_| true),
        Command::Bench {
            problem,
            import,
            solver,
            warmup,
            repeats,
            smooth_sweep,
            stride_sweep,
            out_dir,
            json,
        } => cmd_bench(
            &Problem::load(&problem, &import)?,
            &solver,
            warmup,
            repeats,
            smooth_sweep,
            stride_sweep,
            out_dir.as_deref(),
            json,
        ),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use giamg::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Singular { .. } | E::IndefinitePreconditioner { .. } | E::Breakdown { .. }) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GIAMG_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
