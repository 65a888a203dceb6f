//! Witness configuration method: generic configurations satisfying the
//! singular constraints, the rigid-motion basis and DOR, and Jacobian-rank
//! characterization of the constraint state.

mod characterize;
mod generate;
mod motion;
mod sensitivity;
mod subsystem;

pub use characterize::{
    analyze, characterize, characterize_with, dependent_groups, effective_dor, Verdict, WcmReport, WitnessRun,
};
pub use generate::{generate_witness, generate_witnesses, Witness, WitnessError, DEFAULT_ATTEMPTS};
pub(crate) use motion::normalize_directions;
pub use motion::{apply_rigid_motion, compute_dor, generic_dor, motion_basis, DorResult, RigidMotion};
pub use sensitivity::{representation_sensitivity, SensitivityError, SensitivityRow};
pub use subsystem::SubsystemChecker;
