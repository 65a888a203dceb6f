use nalgebra::DMatrix;
use serde::Serialize;

use super::generate::{generate_witnesses, Witness, WitnessError, DEFAULT_ATTEMPTS};
use super::motion::motion_basis;
use crate::equations::{eval_jacobian, ResidualSystem};
use crate::numeric::{rank_analyze, rank_analyze_with, RankAnalysis, RANK_REL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Under,
    Well,
    Over,
    OverAndUnder,
    /// Witnesses disagree on the Jacobian rank.
    Unstable,
}

impl Verdict {
    pub fn from_counts(rows: usize, cols: usize, rank: usize, dor: usize) -> Verdict {
        let over = rank < rows;
        let under = cols - rank > dor;
        match (over, under) {
            (true, true) => Verdict::OverAndUnder,
            (true, false) => Verdict::Over,
            (false, true) => Verdict::Under,
            (false, false) => Verdict::Well,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Under => "under",
            Verdict::Well => "well",
            Verdict::Over => "over",
            Verdict::OverAndUnder => "over-and-under",
            Verdict::Unstable => "unstable",
        }
    }
}

/// Rank data at one witness.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessRun {
    pub seed: u64,
    pub rank: usize,
    pub dor: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WcmReport {
    pub columns: usize,
    pub rows: usize,
    pub rank: usize,
    pub dor: usize,
    pub verdict: Verdict,
    /// Supports of a reduced basis of `ker Jᵀ`, as residual labels.
    pub dependent_groups: Vec<Vec<String>>,
    /// `dim ker J − dor`: infinitesimal deformations that are not rigid.
    pub free_motions: usize,
    pub seeds: Vec<u64>,
    pub witness_ranks: Vec<usize>,
    #[serde(skip)]
    pub dependent_rows: Vec<Vec<usize>>,
    #[serde(skip)]
    pub runs: Vec<WitnessRun>,
    #[serde(skip)]
    pub analysis: RankAnalysis,
    /// The witness whose analysis is reported.
    #[serde(skip)]
    pub witness: Witness,
}

/// DOR restricted to what the equations allow: `rank M − rank(J·Mᵀ)`. For
/// systems made of motion-invariant constraints this equals `rank M`; fix
/// constraints and anchors remove the motions they pin down.
pub fn effective_dor(system: &ResidualSystem, x: &[f64], j: &DMatrix<f64>) -> usize {
    effective_dor_with(system, x, j, RANK_REL_TOL)
}

fn effective_dor_with(system: &ResidualSystem, x: &[f64], j: &DMatrix<f64>, rel_tol: f64) -> usize {
    let m = motion_basis(system, x);
    let Ok(ma) = rank_analyze_with(&m, rel_tol) else { return 0 };
    if j.nrows() == 0 || ma.rank == 0 {
        return ma.rank;
    }
    let jm = j * m.transpose();
    let scale = rank_analyze(j).map(|a| a.sigma_max()).unwrap_or(0.0) * ma.sigma_max();
    let tol = rel_tol * scale.max(1e-300);
    let moved = jm.svd(false, false).singular_values.iter().filter(|s| **s > tol).count();
    ma.rank.saturating_sub(moved)
}

/// Characterizes the system at each witness and reports the majority
/// outcome. Over iff rank < rows; under iff cols − rank > dor; well iff
/// neither. `dor` defaults to the effective DOR at each witness.
pub fn characterize(system: &ResidualSystem, witnesses: &[Witness], dor: Option<usize>) -> WcmReport {
    characterize_with(system, witnesses, dor, RANK_REL_TOL)
}

/// [`characterize`] with a relative rank tolerance other than the default.
pub fn characterize_with(
    system: &ResidualSystem,
    witnesses: &[Witness],
    dor: Option<usize>,
    rank_tol: f64,
) -> WcmReport {
    assert!(!witnesses.is_empty(), "at least one witness is required");
    let (rows, cols) = (system.num_residuals(), system.num_vars());
    let mut analyses = Vec::new();
    let mut runs = Vec::new();
    for w in witnesses {
        let j = eval_jacobian(system, &w.x).unwrap_or_else(|_| DMatrix::from_element(rows, cols, f64::NAN));
        let analysis = match rank_analyze_with(&j, rank_tol) {
            Ok(a) => a,
            Err(_) => rank_analyze(&DMatrix::zeros(rows, cols)).expect("zero matrix"),
        };
        let d = dor.unwrap_or_else(|| effective_dor_with(system, &w.x, &j, rank_tol));
        let verdict = Verdict::from_counts(rows, cols, analysis.rank, d);
        runs.push(WitnessRun { seed: w.seed, rank: analysis.rank, dor: d, verdict });
        analyses.push(analysis);
    }

    let mut best = 0;
    let mut best_votes = 0;
    for i in 0..runs.len() {
        let votes = runs.iter().filter(|r| r.rank == runs[i].rank && r.dor == runs[i].dor).count();
        if votes > best_votes {
            best = i;
            best_votes = votes;
        }
    }
    let majority = 2 * best_votes > runs.len();
    let run = &runs[best];
    let analysis = analyses.swap_remove(best);
    let dependent_rows = dependent_groups(&analysis.cokernel);
    let dependent_groups =
        dependent_rows.iter().map(|g| g.iter().map(|&r| system.residuals[r].label.clone()).collect()).collect();
    WcmReport {
        columns: cols,
        rows,
        rank: run.rank,
        dor: run.dor,
        verdict: if majority { run.verdict } else { Verdict::Unstable },
        dependent_groups,
        free_motions: (cols - run.rank).saturating_sub(run.dor),
        seeds: runs.iter().map(|r| r.seed).collect(),
        witness_ranks: runs.iter().map(|r| r.rank).collect(),
        dependent_rows,
        witness: witnesses[best].clone(),
        runs,
        analysis,
    }
}

/// Generates `count` witnesses from `seed` and characterizes.
pub fn analyze(system: &ResidualSystem, seed: u64, count: usize) -> Result<WcmReport, WitnessError> {
    let witnesses = generate_witnesses(system, seed, count.max(1), DEFAULT_ATTEMPTS)?;
    Ok(characterize(system, &witnesses, None))
}

/// Row supports of the reduced row echelon form of a `ker Jᵀ` basis
/// (given as columns). Each support is a set of dependent residual rows.
pub fn dependent_groups(cokernel: &DMatrix<f64>) -> Vec<Vec<usize>> {
    const ZERO: f64 = 1e-9;
    let mut a = cokernel.transpose();
    let (k, m) = a.shape();
    let mut pivot_row = 0;
    for col in 0..m {
        if pivot_row == k {
            break;
        }
        let (best, val) = (pivot_row..k).map(|r| (r, a[(r, col)].abs())).fold((pivot_row, 0.0), |acc, cur| {
            if cur.1 > acc.1 {
                cur
            } else {
                acc
            }
        });
        if val <= ZERO {
            continue;
        }
        a.swap_rows(pivot_row, best);
        let p = a[(pivot_row, col)];
        for c in 0..m {
            a[(pivot_row, c)] /= p;
        }
        for r in 0..k {
            if r != pivot_row {
                let f = a[(r, col)];
                if f != 0.0 {
                    for c in 0..m {
                        a[(r, c)] -= f * a[(pivot_row, c)];
                    }
                }
            }
        }
        pivot_row += 1;
    }
    (0..k).map(|r| (0..m).filter(|&c| a[(r, c)].abs() > ZERO).collect::<Vec<_>>()).filter(|g| !g.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_table() {
        assert_eq!(Verdict::from_counts(7, 10, 7, 3), Verdict::Well);
        assert_eq!(Verdict::from_counts(3, 6, 2, 3), Verdict::OverAndUnder);
        assert_eq!(Verdict::from_counts(3, 6, 2, 4), Verdict::Over);
        assert_eq!(Verdict::from_counts(2, 6, 2, 3), Verdict::Under);
    }

    #[test]
    fn rref_supports() {
        // ker Jᵀ spanned by e0 − e1 and e2 + e3 (mixed by a rotation).
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let basis = DMatrix::from_column_slice(
            4,
            2,
            &[s * 0.6, -s * 0.6, s * 0.8, s * 0.8, s * 0.8, -s * 0.8, -s * 0.6, -s * 0.6],
        );
        assert_eq!(dependent_groups(&basis), vec![vec![0, 1], vec![2, 3]]);
    }
}
