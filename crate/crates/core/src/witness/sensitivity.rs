use serde::Serialize;
use thiserror::Error;

use super::characterize::characterize;
use super::generate::{generate_witnesses, WitnessError, DEFAULT_ATTEMPTS};
use super::motion::compute_dor;
use crate::equations::{compile, CompileError};
use crate::model::{EntityKind, Model, PlaneScheme, Representation};

/// One row of a representation comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SensitivityRow {
    pub scheme: Representation,
    pub columns: usize,
    pub rank: usize,
    pub dor: usize,
    /// `columns − rank == dor`.
    pub matched: bool,
    /// `columns − rank` equals the fixed 3 (2D) / 6 (3D) instead.
    pub matched_fixed: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum SensitivityError {
    #[error("scheme {0:?} applies to no entity of the model")]
    Unsupported(Representation),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Witness(#[from] WitnessError),
}

fn rewrite(model: &Model, scheme: Representation) -> Result<Model, SensitivityError> {
    let mut out = model.clone();
    let mut applied = false;
    for e in &mut out.entities {
        let kind = match (e.kind, scheme) {
            (EntityKind::Plane3(_), Representation::Hessian) => EntityKind::Plane3(PlaneScheme::Hessian),
            (EntityKind::Plane3(_), Representation::PointNormal) => EntityKind::Plane3(PlaneScheme::PointNormal),
            (EntityKind::Line3, Representation::PointDirection) => EntityKind::Line3,
            _ => continue,
        };
        applied = true;
        if kind != e.kind {
            e.kind = kind;
            e.params = None;
        }
    }
    if !applied && !model.entities.is_empty() {
        return Err(SensitivityError::Unsupported(scheme));
    }
    Ok(out)
}

/// Recompiles the model under each scheme and reports Jacobian column
/// count, rank and DOR at witnesses (3 seeds from `seed`, majority rank).
pub fn representation_sensitivity(
    model: &Model,
    schemes: &[Representation],
    seed: u64,
) -> Result<Vec<SensitivityRow>, SensitivityError> {
    let fixed = if model.dimension == 2 { 3 } else { 6 };
    let mut rows = Vec::new();
    for &scheme in schemes {
        let variant = rewrite(model, scheme)?;
        let system = compile(&variant)?;
        let (rank, dor) = if system.num_vars() == 0 {
            (0, 0)
        } else {
            let witnesses = generate_witnesses(&system, seed, 3, DEFAULT_ATTEMPTS)?;
            let report = characterize(&system, &witnesses, None);
            (report.rank, compute_dor(&system, &report.witness.x).dor)
        };
        let columns = system.num_vars();
        rows.push(SensitivityRow {
            scheme,
            columns,
            rank,
            dor,
            matched: columns - rank == dor,
            matched_fixed: columns - rank == if columns == 0 { 0 } else { fixed },
        });
    }
    Ok(rows)
}
