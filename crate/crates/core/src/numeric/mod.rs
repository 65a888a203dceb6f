//! Dense rank analysis and nonlinear solvers.

mod rank;
mod solve;

pub use rank::{rank_analyze, rank_analyze_with, RankAnalysis, RankError, RANK_REL_TOL};
pub use solve::{newton_solve, newton_solve_masked, optimize_solve, SolveOptions, SolveResult, SolveStatus};
