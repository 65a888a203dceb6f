//! Detection of minimal dependent constraint groups and maximal
//! well-constrained parts, each with a greedy procedure and an exhaustive
//! oracle.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::equations::{eval_jacobian, ResidualSystem};
use crate::model::Model;
use crate::numeric::{rank_analyze, RANK_REL_TOL};
use crate::witness::{SubsystemChecker, Verdict, Witness};

pub const ORACLE_ROW_CAP: usize = 12;
pub const ORACLE_ENTITY_CAP: usize = 10;

/// Entries of a dependency combination below this are treated as zero.
const SUPPORT_ZERO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    Greedy,
    OracleMinimal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependencyGroup {
    /// Residual indices, ascending.
    pub rows: Vec<usize>,
    pub labels: Vec<String>,
    pub kind: GroupKind,
    /// Greedy only: the excluded row plus the rows its combination really
    /// uses (nonzero coefficients).
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WellPart {
    pub entities: Vec<String>,
    pub constraints: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error("{what} count {count} exceeds the oracle cap {cap}")]
    CapExceeded { what: &'static str, count: usize, cap: usize },
    #[error("seed {0} is out of range")]
    BadSeed(usize),
    #[error("jacobian could not be evaluated at the witness: {0}")]
    Evaluation(String),
}

fn jacobian_at(system: &ResidualSystem, witness: &Witness) -> Result<DMatrix<f64>, DetectionError> {
    eval_jacobian(system, &witness.x).map_err(|e| DetectionError::Evaluation(e.to_string()))
}

fn rank_of_rows(j: &DMatrix<f64>, rows: &[usize], scale: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let sub = j.select_rows(rows);
    // Tolerance relative to the whole Jacobian so that subsets of tiny rows
    // are not promoted to full rank.
    let tol = RANK_REL_TOL * scale;
    sub.svd(false, false).singular_values.iter().filter(|s| **s > tol.max(1e-12)).count()
}

fn sigma_max(j: &DMatrix<f64>) -> f64 {
    rank_analyze(j).map(|a| a.sigma_max()).unwrap_or(0.0)
}

fn labels(system: &ResidualSystem, rows: &[usize]) -> Vec<String> {
    rows.iter().map(|&r| system.residuals[r].label.clone()).collect()
}

/// Scans rows starting at `seed_row`, then ascending, keeping a maximal
/// independent set. Every row that depends on the set at the time it is
/// scanned yields the group `{row} ∪ set`; the combination's nonzero rows
/// are recorded as `support`.
pub fn greedy_dependency_groups(
    system: &ResidualSystem,
    witness: &Witness,
    seed_row: usize,
) -> Result<Vec<DependencyGroup>, DetectionError> {
    let m = system.num_residuals();
    if m == 0 {
        return Ok(Vec::new());
    }
    if seed_row >= m {
        return Err(DetectionError::BadSeed(seed_row));
    }
    let j = jacobian_at(system, witness)?;
    let scale = sigma_max(&j);
    let order = std::iter::once(seed_row).chain((0..m).filter(|&r| r != seed_row));
    let mut independent: Vec<usize> = Vec::new();
    let mut groups = Vec::new();
    for r in order {
        let mut trial = independent.clone();
        trial.push(r);
        if rank_of_rows(&j, &trial, scale) == trial.len() {
            independent.push(r);
            continue;
        }
        let mut rows = trial.clone();
        rows.sort_unstable();
        let mut support = vec![r];
        support.extend(combination_support(&j, &independent, r));
        support.sort_unstable();
        groups.push(DependencyGroup { labels: labels(system, &rows), rows, kind: GroupKind::Greedy, support });
    }
    Ok(groups)
}

/// Rows of `basis` with nonzero coefficient when row `r` of `j` is written
/// as their combination.
fn combination_support(j: &DMatrix<f64>, basis: &[usize], r: usize) -> Vec<usize> {
    if basis.is_empty() {
        return Vec::new();
    }
    let a = j.select_rows(basis).transpose();
    let b = j.row(r).transpose();
    let Ok(coeffs) = a.svd(true, true).solve(&b, 1e-12) else { return Vec::new() };
    let scale = coeffs.amax().max(1.0);
    basis.iter().zip(coeffs.iter()).filter(|(_, c)| c.abs() > SUPPORT_ZERO * scale).map(|(&row, _)| row).collect()
}

/// All inclusion-minimal dependent row sets, by exhaustive enumeration in
/// increasing cardinality.
pub fn oracle_min_dependent_sets(
    system: &ResidualSystem,
    witness: &Witness,
    cap: usize,
) -> Result<Vec<DependencyGroup>, DetectionError> {
    let m = system.num_residuals();
    if m > cap {
        return Err(DetectionError::CapExceeded { what: "row", count: m, cap });
    }
    let j = jacobian_at(system, witness)?;
    let scale = sigma_max(&j);
    let mut circuits: Vec<u32> = Vec::new();
    for mask in subsets_by_size(m, false) {
        if circuits.iter().any(|c| mask & c == *c) {
            continue;
        }
        let rows = bits(mask, m);
        if rank_of_rows(&j, &rows, scale) < rows.len() {
            circuits.push(mask);
        }
    }
    Ok(circuits
        .into_iter()
        .map(|mask| {
            let rows = bits(mask, m);
            DependencyGroup { labels: labels(system, &rows), rows, kind: GroupKind::OracleMinimal, support: Vec::new() }
        })
        .collect())
}

fn bits(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Non-empty subsets of `0..n` by cardinality (ascending or descending),
/// ties in lexicographic order of their sorted elements.
fn subsets_by_size(n: usize, descending: bool) -> Vec<u32> {
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by(|a, b| {
        let size = if descending { b.count_ones().cmp(&a.count_ones()) } else { a.count_ones().cmp(&b.count_ones()) };
        size.then_with(|| bits(*a, n).cmp(&bits(*b, n)))
    });
    masks
}

/// Well-constrained with at least one induced constraint.
fn well_part(model: &Model, checker: &SubsystemChecker<'_>, entities: &[usize]) -> Option<WellPart> {
    let sub = model.induced(entities);
    if sub.constraints.is_empty() {
        return None;
    }
    (checker.report_for(&sub)?.verdict == Verdict::Well).then(|| WellPart {
        entities: sub.entities.iter().map(|e| e.id.clone()).collect(),
        constraints: sub.constraints.iter().map(|c| c.id.clone()).collect(),
    })
}

/// Grows a part from the seed entity by scanning the remaining entities in
/// model order and keeping each one whose addition leaves the induced
/// subsystem well-constrained. Scans repeat until one adds nothing, then
/// the procedure restarts on the leftovers with the first leftover as the
/// next seed. Parts without any induced constraint are not reported.
pub fn greedy_well_parts(
    model: &Model,
    system: &ResidualSystem,
    witnesses: &[Witness],
    seed_entity: usize,
) -> Result<Vec<WellPart>, DetectionError> {
    let n = model.entities.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if seed_entity >= n {
        return Err(DetectionError::BadSeed(seed_entity));
    }
    let checker = SubsystemChecker::new(model, system, witnesses);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut seed = seed_entity;
    let mut parts = Vec::new();
    loop {
        let mut part = vec![seed];
        let mut accepted: Option<WellPart> = None;
        let mut grew = true;
        while grew {
            grew = false;
            for &e in &remaining {
                if part.contains(&e) {
                    continue;
                }
                let mut trial = part.clone();
                trial.push(e);
                trial.sort_unstable();
                if let Some(p) = well_part(model, &checker, &trial) {
                    part = trial;
                    accepted = Some(p);
                    grew = true;
                }
            }
        }
        remaining.retain(|e| !part.contains(e));
        if let Some(p) = accepted {
            parts.push(p);
        }
        match remaining.first() {
            Some(&next) => seed = next,
            None => break,
        }
    }
    Ok(parts)
}

/// Largest well-constrained entity subset (with at least one induced
/// constraint) by exhaustive search; ties go to the lexicographically
/// smallest index set. `None` when no subset qualifies.
pub fn oracle_max_well_part(
    model: &Model,
    system: &ResidualSystem,
    witnesses: &[Witness],
    cap: usize,
) -> Result<Option<WellPart>, DetectionError> {
    let n = model.entities.len();
    if n > cap {
        return Err(DetectionError::CapExceeded { what: "entity", count: n, cap });
    }
    let checker = SubsystemChecker::new(model, system, witnesses);
    Ok(subsets_by_size(n, true).into_iter().find_map(|mask| well_part(model, &checker, &bits(mask, n))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::parse_linear_system;
    use crate::witness::generate_witness;

    fn vcm(last: [f64; 3]) -> ResidualSystem {
        let rows = [[1.0, 1.0, 1.0, 0.0], [2.0, 1.0, 1.0, 1.0], [3.0, 2.0, 1.0, 1.0], [1.0, 2.0, 3.0, 1.0]];
        let mut eqs: Vec<String> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                format!(r#"{{"id":"E{}","coefficients":[{},{},{}],"rhs":{}}}"#, i + 1, r[0], r[1], r[2], r[3])
            })
            .collect();
        eqs.push(format!(r#"{{"id":"E5","coefficients":[{},{},{}],"rhs":2}}"#, last[0], last[1], last[2]));
        parse_linear_system(&format!(r#"{{"variables":["x","y","z"],"equations":[{}]}}"#, eqs.join(","))).unwrap()
    }

    #[test]
    fn greedy_on_vcm2_misses_the_pair() {
        let s = vcm([2.0, 4.0, 6.0]);
        let w = generate_witness(&s, 0, 1).unwrap();
        let greedy = greedy_dependency_groups(&s, &w, 0).unwrap();
        let rows: Vec<Vec<usize>> = greedy.iter().map(|g| g.rows.clone()).collect();
        assert_eq!(rows, vec![vec![0, 1, 2, 3], vec![0, 1, 2, 4]]);
        let oracle = oracle_min_dependent_sets(&s, &w, ORACLE_ROW_CAP).unwrap();
        assert!(oracle.iter().any(|g| g.rows == vec![3, 4]));
    }

    #[test]
    fn oracle_cap_is_enforced() {
        let s = vcm([2.0, 4.0, 6.0]);
        let w = generate_witness(&s, 0, 1).unwrap();
        assert!(matches!(oracle_min_dependent_sets(&s, &w, 4), Err(DetectionError::CapExceeded { .. })));
    }

    #[test]
    fn subset_order() {
        assert_eq!(subsets_by_size(3, false), vec![0b001, 0b010, 0b100, 0b011, 0b101, 0b110, 0b111]);
        assert_eq!(subsets_by_size(2, true), vec![0b11, 0b01, 0b10]);
    }
}
