use std::time::{Duration, Instant};

/// Accumulated wall-clock time per solver phase.
///
/// `smooth` covers every level including the first; `first_level_smooth` is
/// the finest level's share of it. `transfer` is residual restriction plus
/// error prolongation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub setup: Duration,
    pub total_solve: Duration,
    pub vcycle: Duration,
    pub smooth: Duration,
    pub first_level_smooth: Duration,
    pub residual: Duration,
    pub transfer: Duration,
    pub coarsest_solve: Duration,
    pub cg_matvec: Duration,
    pub cg_dot: Duration,
    pub iterations: usize,
    pub vcycles: usize,
}

impl Timings {
    pub fn per_iteration(&self) -> Duration {
        if self.iterations == 0 {
            Duration::ZERO
        } else {
            self.total_solve / self.iterations as u32
        }
    }

    /// `(name, seconds)` for every category, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("setup", self.setup.as_secs_f64()),
            ("total_solve", self.total_solve.as_secs_f64()),
            ("per_iteration", self.per_iteration().as_secs_f64()),
            ("vcycle", self.vcycle.as_secs_f64()),
            ("smooth", self.smooth.as_secs_f64()),
            ("first_level_smooth", self.first_level_smooth.as_secs_f64()),
            ("residual", self.residual.as_secs_f64()),
            ("transfer", self.transfer.as_secs_f64()),
            ("cg_matvec", self.cg_matvec.as_secs_f64()),
            ("cg_dot", self.cg_dot.as_secs_f64()),
            ("coarsest_solve", self.coarsest_solve.as_secs_f64()),
        ]
    }

    /// `key = value` lines, seconds with microsecond resolution.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v:.6}\n"));
        }
        out.push_str(&format!("iterations = {}\n", self.iterations));
        out.push_str(&format!("vcycles = {}\n", self.vcycles));
        out
    }
}

pub(crate) fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}
