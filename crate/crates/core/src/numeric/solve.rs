use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::equations::{eval_jacobian, eval_residuals, EvalError, ResidualSystem};
use crate::model::RESIDUAL_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    Diverged,
    Inconsistent,
    MaxIterations,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Euclidean norm of the final residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual norm before each iteration and after the last one.
    pub history: Vec<f64>,
    pub diagnostic: Option<String>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Convergence threshold on the residual norm.
    pub tolerance: f64,
    /// Relative cutoff for singular values in the pseudo-inverse step.
    pub rank_tol: f64,
    /// Backtrack Newton steps until the residual norm decreases.
    pub line_search: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iter: 100, tolerance: RESIDUAL_TOL, rank_tol: 1e-12, line_search: true }
    }
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn finish(
    status: SolveStatus,
    x: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
    diagnostic: Option<String>,
) -> SolveResult {
    let residual_norm = *history.last().unwrap_or(&0.0);
    SolveResult { status, x, residual_norm, iterations, history, diagnostic }
}

fn domain_failure(e: EvalError, x: Vec<f64>, mut history: Vec<f64>, iterations: usize) -> SolveResult {
    if history.is_empty() {
        history.push(f64::INFINITY);
    }
    finish(SolveStatus::Diverged, x, history, iterations, Some(e.to_string()))
}

/// Newton-Raphson with pseudo-inverse steps `x ← x − α·J⁺r`.
///
/// With line search enabled, a step that cannot decrease `‖r‖` means the
/// iterate is a least-squares stationary point with nonzero residual, which
/// is reported as inconsistent.
pub fn newton_solve(system: &ResidualSystem, start: &[f64], opts: &SolveOptions) -> SolveResult {
    newton_core(system, start, None, opts)
}

/// Newton iteration over the `free` variables only; the others stay at
/// their `start` values. Used for block-wise solving.
pub fn newton_solve_masked(system: &ResidualSystem, start: &[f64], free: &[usize], opts: &SolveOptions) -> SolveResult {
    newton_core(system, start, Some(free), opts)
}

fn newton_core(system: &ResidualSystem, start: &[f64], free: Option<&[usize]>, opts: &SolveOptions) -> SolveResult {
    let mut x = start.to_vec();
    let mut history = Vec::new();
    let mut r = match eval_residuals(system, &x) {
        Ok(r) => r,
        Err(e) => return domain_failure(e, x, history, 0),
    };
    let mut growth = 0;
    for iter in 0..opts.max_iter {
        let rn = norm(&r);
        history.push(rn);
        if rn <= opts.tolerance {
            return finish(SolveStatus::Converged, x, history, iter, None);
        }
        let j = match eval_jacobian(system, &x) {
            Ok(j) => j,
            Err(e) => return domain_failure(e, x, history, iter),
        };
        let j = match free {
            Some(cols) => j.select_columns(cols),
            None => j,
        };
        let step = match pinv_step(&j, &r, opts.rank_tol) {
            Some(s) => match free {
                Some(cols) => {
                    let mut full = vec![0.0; x.len()];
                    for (k, &c) in cols.iter().enumerate() {
                        full[c] = s[k];
                    }
                    full
                }
                None => s,
            },
            None => return finish(SolveStatus::Diverged, x, history, iter, Some("SVD failed".into())),
        };

        let mut alpha = 1.0;
        let mut accepted = None;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi - alpha * si).collect();
            let eval = eval_residuals(system, &trial);
            match eval {
                Ok(tr) if !opts.line_search || norm(&tr) < rn => {
                    accepted = Some((trial, tr));
                    break;
                }
                Err(e) if !opts.line_search => return domain_failure(e, trial, history, iter + 1),
                _ => {}
            }
            alpha *= 0.5;
            if alpha < 1e-10 {
                break;
            }
        }
        let Some((nx, nr)) = accepted else {
            return finish(
                SolveStatus::Inconsistent,
                x,
                history,
                iter,
                Some(format!("no descent from residual norm {rn:.3e}; least-squares stationary point")),
            );
        };
        let new_norm = norm(&nr);
        if new_norm > rn {
            growth += 1;
            if growth >= 3 {
                x = nx;
                history.push(new_norm);
                return finish(
                    SolveStatus::Diverged,
                    x,
                    history,
                    iter + 1,
                    Some("residual grew 3 consecutive iterations".into()),
                );
            }
        } else {
            growth = 0;
        }
        x = nx;
        r = nr;
        if plateaued(&history, new_norm, opts.tolerance) {
            history.push(new_norm);
            return finish(
                SolveStatus::Inconsistent,
                x,
                history,
                iter + 1,
                Some(format!("residual plateau at {new_norm:.3e}")),
            );
        }
    }
    let rn = norm(&r);
    history.push(rn);
    let status = if rn <= opts.tolerance { SolveStatus::Converged } else { SolveStatus::MaxIterations };
    finish(status, x, history, opts.max_iter, None)
}

/// True when the last few iterations stopped making relative progress while
/// still above tolerance.
fn plateaued(history: &[f64], current: f64, tolerance: f64) -> bool {
    const WINDOW: usize = 5;
    if current <= tolerance || history.len() < WINDOW {
        return false;
    }
    let past = history[history.len() - WINDOW];
    (past - current) <= 1e-9 * past
}

fn pinv_step(j: &DMatrix<f64>, r: &[f64], rank_tol: f64) -> Option<Vec<f64>> {
    let (m, n) = j.shape();
    if n == 0 {
        return Some(Vec::new());
    }
    if m == 0 {
        return Some(vec![0.0; n]);
    }
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (rank_tol * smax).max(f64::MIN_POSITIVE);
    let rhs = DVector::from_column_slice(r);
    svd.solve(&rhs, eps).ok().map(|s| s.iter().copied().collect())
}

/// Levenberg-Marquardt minimization of `Σ r_i²`. Handles non-square and
/// rank-deficient systems. A stationary point with `‖r‖` above tolerance is
/// reported as inconsistent.
pub fn optimize_solve(system: &ResidualSystem, start: &[f64], opts: &SolveOptions) -> SolveResult {
    let n = start.len();
    let mut x = start.to_vec();
    let mut history = Vec::new();
    let mut r = match eval_residuals(system, &x) {
        Ok(r) => r,
        Err(e) => return domain_failure(e, x, history, 0),
    };
    let mut cost = norm(&r);
    let mut lambda: Option<f64> = None;
    for iter in 0..opts.max_iter {
        history.push(cost);
        if cost <= opts.tolerance {
            return finish(SolveStatus::Converged, x, history, iter, None);
        }
        let j = match eval_jacobian(system, &x) {
            Ok(j) => j,
            Err(e) => return domain_failure(e, x, history, iter),
        };
        let rv = DVector::from_column_slice(&r);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &rv;
        let scale = j.norm().max(1.0) * cost.max(1.0);
        if g.amax() <= 1e-12 * scale {
            return finish(
                SolveStatus::Inconsistent,
                x,
                history,
                iter,
                Some(format!("stationary with residual norm {cost:.3e}")),
            );
        }
        let mut lam = lambda.unwrap_or_else(|| 1e-3 * jtj.diagonal().amax().max(1e-12));
        let mut accepted = None;
        while lam < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lam;
            }
            if let Some(chol) = a.cholesky() {
                let step = chol.solve(&g);
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi - si).collect();
                if let Ok(tr) = eval_residuals(system, &trial) {
                    let tc = norm(&tr);
                    if tc < cost {
                        accepted = Some((trial, tr, tc));
                        break;
                    }
                }
            }
            lam *= 4.0;
        }
        let Some((nx, nr, nc)) = accepted else {
            return finish(
                SolveStatus::Inconsistent,
                x,
                history,
                iter,
                Some(format!("no descent from residual norm {cost:.3e}; least-squares stationary point")),
            );
        };
        lambda = Some((lam / 3.0).max(1e-15));
        x = nx;
        r = nr;
        cost = nc;
    }
    history.push(cost);
    let status = if cost <= opts.tolerance { SolveStatus::Converged } else { SolveStatus::MaxIterations };
    finish(status, x, history, opts.max_iter, None)
}
