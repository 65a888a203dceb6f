//! Decomposition of well-constrained systems into rigid clusters, either
//! bottom-up (merging) or top-down (splitting at articulation pairs), and
//! recombination of the solved clusters.

mod align;
mod bottom_up;
mod solve;
mod top_down;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ConstraintKind, EntityKind, Model};
use crate::numeric::SolveStatus;

pub use align::{fit_rigid, AlignError};
pub use bottom_up::bottom_up;
pub use solve::{
    initial_guess, place_on_shared, solve_anchored, solve_tree, AnchoredSolve, Placement, Positions, RecombinePlan,
};
pub use top_down::top_down;

/// Shared-alignment residual above which clusters are declared inconsistent.
pub const ALIGN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    BottomUp,
    TopDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeRule {
    /// Two clusters sharing at least two points.
    Pair,
    /// Three clusters pairwise sharing one distinct point.
    Triple,
}

/// Distance bond added between a duplicated articulation pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VirtualBond {
    pub id: String,
    pub between: [String; 2],
}

/// Node of a cluster tree. `constraints` lists constraint ids; ids of
/// virtual bonds start with `vb:`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "node", rename_all = "kebab-case")]
pub enum ClusterNode {
    Leaf {
        entities: Vec<String>,
        constraints: Vec<String>,
    },
    Merge {
        rule: MergeRule,
        shared: Vec<String>,
        entities: Vec<String>,
        constraints: Vec<String>,
        children: Vec<ClusterNode>,
    },
    Split {
        pair: [String; 2],
        /// Index of the child solved first; its solution sets the bond value.
        donor: usize,
        bond: VirtualBond,
        entities: Vec<String>,
        children: Vec<ClusterNode>,
    },
    Irreducible {
        entities: Vec<String>,
        constraints: Vec<String>,
        reason: String,
    },
}

impl ClusterNode {
    pub fn entities(&self) -> &[String] {
        match self {
            ClusterNode::Leaf { entities, .. }
            | ClusterNode::Merge { entities, .. }
            | ClusterNode::Split { entities, .. }
            | ClusterNode::Irreducible { entities, .. } => entities,
        }
    }

    pub fn children(&self) -> &[ClusterNode] {
        match self {
            ClusterNode::Merge { children, .. } | ClusterNode::Split { children, .. } => children,
            _ => &[],
        }
    }

    /// Leaves and irreducible nodes, depth first.
    pub fn leaves(&self) -> Vec<&ClusterNode> {
        match self {
            ClusterNode::Leaf { .. } | ClusterNode::Irreducible { .. } => vec![self],
            _ => self.children().iter().flat_map(|c| c.leaves()).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClusterTree {
    pub strategy: Strategy,
    /// Top-level clusters; a single root for a fully decomposed rigid model.
    pub roots: Vec<ClusterNode>,
    /// Constraints not absorbed by any cluster: redundant or conflicting.
    pub leftover_constraints: Vec<String>,
    /// Entities not covered by any cluster: under-constrained.
    pub uncovered_entities: Vec<String>,
}

impl ClusterTree {
    pub fn is_complete(&self) -> bool {
        self.roots.len() == 1 && self.leftover_constraints.is_empty() && self.uncovered_entities.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum DecompositionError {
    #[error("cluster {cluster:?} failed to solve: {message}")]
    ClusterSolve { cluster: Vec<String>, message: String, status: Option<SolveStatus> },
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("tree does not cover the model as one rigid cluster")]
    Incomplete,
    #[error("unknown constraint id {0}")]
    UnknownConstraint(String),
}

/// Planar point/distance models, the scope of the cluster rules.
pub(crate) fn in_point_distance_scope(model: &Model) -> bool {
    model.dimension == 2
        && model.entities.iter().all(|e| e.kind == EntityKind::Point2)
        && model.constraints.iter().all(|c| c.kind == ConstraintKind::DistancePp)
}

pub(crate) fn ids<'a>(model: &Model, idx: impl IntoIterator<Item = &'a usize>) -> Vec<String> {
    idx.into_iter().map(|&i| model.entities[i].id.clone()).collect()
}

pub(crate) fn constraint_ids<'a>(model: &Model, idx: impl IntoIterator<Item = &'a usize>) -> Vec<String> {
    idx.into_iter().map(|&i| model.constraints[i].id.clone()).collect()
}

/// The whole model as one cluster, for models outside the rule scope or
/// without any decomposition.
pub(crate) fn whole(model: &Model, strategy: Strategy, reason: &str) -> ClusterTree {
    let all_e: Vec<usize> = (0..model.entities.len()).collect();
    let all_c: Vec<usize> = (0..model.constraints.len()).collect();
    ClusterTree {
        strategy,
        roots: vec![ClusterNode::Irreducible {
            entities: ids(model, &all_e),
            constraints: constraint_ids(model, &all_c),
            reason: reason.to_string(),
        }],
        leftover_constraints: Vec::new(),
        uncovered_entities: Vec::new(),
    }
}
