//! Graph representations of a constraint system and the structural
//! (combinatorial) analyses on them: matching, Dulmage-Mendelsohn
//! decomposition, SCC solve planning and DOF/DOC counting.

mod counting;
mod graphs;
mod matching;
mod plan;

pub use counting::{counting_state, CountingMode, CountingReport, StructuralVerdict, EXHAUSTIVE_CAP};
pub use graphs::{build_graphs, ConstraintGraph, ConstraintNode, EntityNode, EquationGraph};
pub use matching::{
    dm_decompose, dm_decompose_with, max_matching, max_matching_ordered, DmPart, DmPartition, Matching, Saturation,
};
pub use plan::{scc_plan, solve_by_plan, Block, PlanError, SolvePlan};
