use std::collections::HashMap;

use super::characterize::{characterize, Verdict, WcmReport};
use super::generate::Witness;
use crate::equations::{compile, ResidualSystem};
use crate::model::Model;

/// Characterizes subsystems of a model at the restrictions of witnesses of
/// the whole system. A whole-system witness satisfies every singular
/// residual, so its restriction is a witness of any subsystem.
pub struct SubsystemChecker<'a> {
    model: &'a Model,
    witnesses: Vec<HashMap<String, f64>>,
    seeds: Vec<u64>,
}

impl<'a> SubsystemChecker<'a> {
    pub fn new(model: &'a Model, system: &ResidualSystem, witnesses: &[Witness]) -> Self {
        let names = system.variable_names();
        Self {
            model,
            witnesses: witnesses.iter().map(|w| names.iter().cloned().zip(w.x.iter().copied()).collect()).collect(),
            seeds: witnesses.iter().map(|w| w.seed).collect(),
        }
    }

    /// Report for an arbitrary sub-model whose variables exist in the
    /// whole system; `None` if it does not compile.
    pub fn report_for(&self, sub: &Model) -> Option<WcmReport> {
        let system = compile(sub).ok()?;
        let names = system.variable_names();
        let local: Vec<Witness> = self
            .witnesses
            .iter()
            .zip(&self.seeds)
            .map(|(w, &seed)| Witness {
                x: names.iter().map(|n| w[n]).collect(),
                satisfied: Vec::new(),
                seed,
                attempts: 0,
            })
            .collect();
        if local.is_empty() {
            return None;
        }
        Some(characterize(&system, &local, None))
    }

    /// Verdict of the given entities with the given constraints (indices
    /// into the model).
    pub fn verdict(&self, entities: &[usize], constraints: &[usize]) -> Option<Verdict> {
        self.report_for(&self.model.subsystem(entities, constraints)).map(|r| r.verdict)
    }

    /// Verdict of the subsystem induced by the entities.
    pub fn induced_verdict(&self, entities: &[usize]) -> Option<Verdict> {
        self.report_for(&self.model.induced(entities)).map(|r| r.verdict)
    }
}
