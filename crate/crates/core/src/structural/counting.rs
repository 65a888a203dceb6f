use std::collections::HashMap;

use serde::Serialize;

use super::graphs::ConstraintGraph;
use crate::model::EntityKind;
use crate::witness::generic_dor;

/// Entity count up to which every connected induced subgraph is checked.
pub const EXHAUSTIVE_CAP: usize = 12;

/// Seed of the random configuration behind generic per-subset DOR values.
const GENERIC_DOR_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructuralVerdict {
    Under,
    Well,
    Over,
}

/// Threshold used in `DOF(X') − DOC(C') ≥ threshold`.
pub enum CountingMode<'a> {
    /// D = 3 (2D) or 6 (3D), capped per subset by the subset's generic DOR
    /// (a single 2D point can only move 2 ways, two 3D points 5 ways).
    FixedD,
    /// Thresholds supplied per entity subset, typically witness-based DOR.
    Dor(&'a dyn Fn(&[usize]) -> usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CountingReport {
    pub verdict: StructuralVerdict,
    pub dof: usize,
    pub doc: usize,
    /// Threshold applied to the whole system.
    pub threshold: usize,
    /// Smallest connected subsystem violating the count, when over.
    pub violating: Option<Vec<String>>,
    /// Every connected subset was inspected (otherwise sampled).
    pub exhaustive: bool,
    /// 3D counting is only a necessary condition for rigidity.
    pub advisory: bool,
}

pub fn counting_state(cg: &ConstraintGraph, mode: &CountingMode<'_>) -> CountingReport {
    let n = cg.entities.len();
    let d = if cg.dimension == 2 { 3 } else { 6 };
    let mut cache: HashMap<Vec<EntityKind>, usize> = HashMap::new();
    let mut threshold = |mask: &[bool], induced: &[usize]| -> usize {
        if induced.iter().any(|&k| cg.constraints[k].is_grounding()) {
            return 0;
        }
        let members: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        match mode {
            CountingMode::Dor(f) => f(&members),
            CountingMode::FixedD => {
                let mut kinds: Vec<EntityKind> = members.iter().map(|&i| cg.entities[i].kind).collect();
                kinds.sort_by_key(|k| format!("{k:?}"));
                let g =
                    *cache.entry(kinds.clone()).or_insert_with(|| generic_dor(&kinds, cg.dimension, GENERIC_DOR_SEED));
                g.min(d)
            }
        }
    };
    let count = |mask: &[bool], induced: &[usize]| -> (usize, usize) {
        let dof = (0..n).filter(|&i| mask[i]).map(|i| cg.entities[i].dof).sum();
        let doc = induced.iter().map(|&k| cg.constraints[k].doc).sum();
        (dof, doc)
    };

    let exhaustive = n <= EXHAUSTIVE_CAP;
    let candidates: Vec<Vec<bool>> = if exhaustive { all_subsets_by_size(n) } else { sampled_subsets(cg) };
    let mut violating = None;
    for mask in candidates {
        if !cg.is_connected(&mask) {
            continue;
        }
        let induced = cg.induced_constraints(&mask);
        let (dof, doc) = count(&mask, &induced);
        if dof < doc + threshold(&mask, &induced) {
            violating = Some((0..n).filter(|&i| mask[i]).map(|i| cg.entities[i].id.clone()).collect());
            break;
        }
    }

    let whole = vec![true; n];
    let induced = cg.induced_constraints(&whole);
    let (dof, doc) = count(&whole, &induced);
    let thr = if n == 0 { 0 } else { threshold(&whole, &induced) };
    let verdict = if violating.is_some() || dof < doc + thr {
        StructuralVerdict::Over
    } else if dof > doc + thr {
        StructuralVerdict::Under
    } else {
        StructuralVerdict::Well
    };
    if verdict == StructuralVerdict::Over && violating.is_none() {
        violating = Some(cg.entities.iter().map(|e| e.id.clone()).collect());
    }
    CountingReport { verdict, dof, doc, threshold: thr, violating, exhaustive, advisory: cg.dimension == 3 }
}

/// All non-empty subsets, by increasing size then lexicographic index order.
fn all_subsets_by_size(n: usize) -> Vec<Vec<bool>> {
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|m| {
        let bits: Vec<u32> = (0..n as u32).filter(|b| m & (1 << b) != 0).collect();
        (m.count_ones(), bits)
    });
    masks.into_iter().map(|m| (0..n).map(|i| m & (1 << i) != 0).collect()).collect()
}

/// Breadth-first grown prefixes from every entity plus every constraint's
/// operand set, ordered by size.
fn sampled_subsets(cg: &ConstraintGraph) -> Vec<Vec<bool>> {
    let n = cg.entities.len();
    let nb = cg.neighbours();
    let mut out: Vec<Vec<bool>> = Vec::new();
    for c in &cg.constraints {
        let mut mask = vec![false; n];
        for &e in &c.operands {
            mask[e] = true;
        }
        out.push(mask);
    }
    for start in 0..n {
        let mut mask = vec![false; n];
        let mut queue = std::collections::VecDeque::from([start]);
        mask[start] = true;
        out.push(mask.clone());
        while let Some(v) = queue.pop_front() {
            for &w in &nb[v] {
                if !mask[w] {
                    mask[w] = true;
                    queue.push_back(w);
                    out.push(mask.clone());
                }
            }
        }
    }
    out.sort_by_key(|m| m.iter().filter(|b| **b).count());
    out.dedup();
    out
}
