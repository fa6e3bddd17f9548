//! Branch-and-bound over an LP relaxation engine, plus model export.

mod bnb;
mod export;
mod lp;
mod propagate;

pub use bnb::{solve_milp, solve_milp_with, warm_start, BnbNode, Limits, SolveReport, SolveStatus};
pub use export::{export_model, read_mps, ExportFormat, ParsedMps};
pub use lp::{solve_lp, LpEngine, LpSolution, LpStatus};
pub use propagate::{presolve, PresolveStats, Propagator, WorkingProblem};

use thiserror::Error;

/// Absolute tolerance on row residuals.
pub const FEAS_TOL: f64 = 1e-6;
/// Distance to the nearest integer below which a binary counts as integral.
pub const INT_TOL: f64 = 1e-5;
/// Relative optimality gap at which the search stops.
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("model has no columns")]
    EmptyModel,
    #[error("LP engine failure: {0}")]
    Engine(String),
    #[error("malformed hint: {0}")]
    MalformedHint(String),
    #[error("MPS parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
