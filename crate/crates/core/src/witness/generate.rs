use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::motion::normalize_directions;
use crate::equations::{eval_residuals, ResidualRole, ResidualSystem};
use crate::model::{ConstraintKind, RESIDUAL_TOL};
use crate::numeric::{optimize_solve, SolveOptions};

pub const DEFAULT_ATTEMPTS: usize = 10;

/// Entities closer than this (max-norm over parameters) count as coincident.
const COINCIDENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    /// Singular residual rows satisfied at `x`.
    pub satisfied: Vec<usize>,
    pub seed: u64,
    pub attempts: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum WitnessError {
    #[error("no witness after {attempts} attempts (seed {seed}): {reason}")]
    Exhausted { attempts: usize, seed: u64, reason: String },
}

/// Samples variables uniformly in [−1, 1] and projects onto the singular
/// (and normalization) residuals with least squares. Candidates where two
/// entities of the same kind coincide without being constrained to are
/// rejected.
pub fn generate_witness(system: &ResidualSystem, seed: u64, max_attempts: usize) -> Result<Witness, WitnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<usize> = (0..system.num_residuals())
        .filter(|&i| system.residuals[i].singular && system.residuals[i].role != ResidualRole::Anchor)
        .collect();
    let singular = system.select(&rows);
    let allowed = forced_coincidences(system);
    let opts = SolveOptions { max_iter: 200, ..SolveOptions::default() };
    let mut reason = String::from("no attempts made");

    for attempt in 1..=max_attempts {
        let mut x: Vec<f64> = (0..system.num_vars()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for slot in &system.entities {
            normalize_directions(slot.kind, &mut x[slot.range()]);
        }
        if !rows.is_empty() {
            let res = optimize_solve(&singular, &x, &opts);
            if !res.converged() {
                reason =
                    format!("singular subsystem not satisfied ({:?}, residual {:.3e})", res.status, res.residual_norm);
                continue;
            }
            x = res.x;
        }
        let r = match eval_residuals(&singular, &x) {
            Ok(r) => r,
            Err(e) => {
                reason = e.to_string();
                continue;
            }
        };
        if r.iter().any(|v| v.abs() > RESIDUAL_TOL) {
            reason = "singular residual above tolerance".into();
            continue;
        }
        if let Some((a, b)) = coincident_pair(system, &x, &allowed) {
            reason = format!("entities {} and {} coincide", system.entities[a].id, system.entities[b].id);
            continue;
        }
        return Ok(Witness { x, satisfied: rows, seed, attempts: attempt });
    }
    Err(WitnessError::Exhausted { attempts: max_attempts, seed, reason })
}

/// Witnesses for seeds `seed, seed + 1, ...`.
pub fn generate_witnesses(
    system: &ResidualSystem,
    seed: u64,
    count: usize,
    max_attempts: usize,
) -> Result<Vec<Witness>, WitnessError> {
    (0..count as u64).map(|k| generate_witness(system, seed.wrapping_add(k), max_attempts)).collect()
}

/// Union-find classes of entities joined by coincident constraints.
fn forced_coincidences(system: &ResidualSystem) -> Vec<usize> {
    let mut owner = vec![0; system.num_vars()];
    for (e, slot) in system.entities.iter().enumerate() {
        for v in slot.range() {
            owner[v] = e;
        }
    }
    let mut parent: Vec<usize> = (0..system.entities.len()).collect();
    fn find(p: &[usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    for r in &system.residuals {
        if r.kind == Some(ConstraintKind::Coincident) {
            let ents: Vec<usize> = r.expr.vars().into_iter().map(|v| owner[v]).collect();
            for w in ents.windows(2) {
                let (a, b) = (find(&parent, w[0]), find(&parent, w[1]));
                parent[a] = b;
            }
        }
    }
    (0..parent.len()).map(|e| find(&parent, e)).collect()
}

fn coincident_pair(system: &ResidualSystem, x: &[f64], class: &[usize]) -> Option<(usize, usize)> {
    let ents = &system.entities;
    for a in 0..ents.len() {
        for b in a + 1..ents.len() {
            if ents[a].kind != ents[b].kind || class[a] == class[b] {
                continue;
            }
            let close = ents[a].range().zip(ents[b].range()).all(|(i, j)| (x[i] - x[j]).abs() <= COINCIDENCE_TOL);
            if close {
                return Some((a, b));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::compile;
    use crate::model::{Constraint, ConstraintKind as K, Entity, EntityKind, Model};

    #[test]
    fn incidences_hold_at_witness() {
        let mut m = Model::new(2);
        m.entities.push(Entity::new("P", EntityKind::Point2));
        m.entities.push(Entity::new("Q", EntityKind::Point2));
        m.entities.push(Entity::new("L", EntityKind::Line2));
        m.constraints.push(Constraint::new("a", K::PointOnLine, &["P", "L"], None));
        m.constraints.push(Constraint::new("b", K::PointOnLine, &["Q", "L"], None));
        m.constraints.push(Constraint::new("d", K::DistancePp, &["P", "Q"], Some(5.0)));
        let s = compile(&m).unwrap();
        for seed in 0..10 {
            let w = generate_witness(&s, seed, DEFAULT_ATTEMPTS).unwrap();
            let r = eval_residuals(&s, &w.x).unwrap();
            assert!(r[0].abs() <= RESIDUAL_TOL && r[1].abs() <= RESIDUAL_TOL);
            // The distance is not singular, so the witness is generic for it.
            assert!(r[2].abs() > 1.0);
            assert_eq!(w.satisfied, vec![0, 1]);
        }
    }

    #[test]
    fn no_singular_rows_accepts_first_sample() {
        let mut m = Model::new(2);
        m.entities.push(Entity::new("P", EntityKind::Point2));
        m.entities.push(Entity::new("Q", EntityKind::Point2));
        m.constraints.push(Constraint::new("d", K::DistancePp, &["P", "Q"], Some(5.0)));
        let w = generate_witness(&compile(&m).unwrap(), 3, DEFAULT_ATTEMPTS).unwrap();
        assert_eq!(w.attempts, 1);
        assert!(w.x.iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn coincident_points_are_allowed() {
        let mut m = Model::new(2);
        m.entities.push(Entity::new("P", EntityKind::Point2));
        m.entities.push(Entity::new("Q", EntityKind::Point2));
        m.constraints.push(Constraint::new("k", K::Coincident, &["P", "Q"], None));
        let w = generate_witness(&compile(&m).unwrap(), 0, DEFAULT_ATTEMPTS).unwrap();
        assert_eq!(w.attempts, 1);
    }

    #[test]
    fn same_seed_same_witness() {
        let mut m = Model::new(3);
        m.entities.push(Entity::new("L", EntityKind::Line3));
        let s = compile(&m).unwrap();
        assert_eq!(generate_witness(&s, 42, 10).unwrap(), generate_witness(&s, 42, 10).unwrap());
    }
}
