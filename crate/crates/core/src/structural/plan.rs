use serde::Serialize;
use thiserror::Error;

use super::graphs::EquationGraph;
use super::matching::Matching;
use crate::equations::ResidualSystem;
use crate::numeric::{newton_solve_masked, SolveOptions, SolveResult};

/// Equations and the variables they determine, solved simultaneously.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub eqs: Vec<usize>,
    pub vars: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolvePlan {
    pub blocks: Vec<Block>,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("matching is not perfect: {unmatched_eqs} equations and {unmatched_vars} variables unmatched")]
    NotPerfect { unmatched_eqs: usize, unmatched_vars: usize },
    #[error("block {block} failed to solve: {message}")]
    BlockFailed { block: usize, message: String, result: Box<SolveResult> },
}

/// Orients matched edges variable→equation and unmatched edges
/// equation→variable, then takes strongly connected components. Tarjan's
/// algorithm emits components sinks-first, which is already the order in
/// which blocks can be solved.
pub fn scc_plan(g: &EquationGraph, matching: &Matching) -> Result<SolvePlan, PlanError> {
    let ne = g.num_eqs();
    let unmatched_eqs = matching.eq_to_var.iter().filter(|m| m.is_none()).count();
    let unmatched_vars = matching.var_to_eq.iter().filter(|m| m.is_none()).count();
    if unmatched_eqs > 0 || unmatched_vars > 0 || ne != g.num_vars() {
        return Err(PlanError::NotPerfect { unmatched_eqs, unmatched_vars });
    }
    // Contract each matched pair into its equation node: eq e depends on
    // eq e' when e uses a variable matched to e'.
    let succ: Vec<Vec<usize>> = (0..ne)
        .map(|e| {
            g.adj[e]
                .iter()
                .filter(|&&v| matching.eq_to_var[e] != Some(v))
                .map(|&v| matching.var_to_eq[v].expect("perfect"))
                .collect()
        })
        .collect();
    let blocks = tarjan(&succ)
        .into_iter()
        .map(|mut eqs| {
            eqs.sort_unstable();
            let mut vars: Vec<usize> = eqs.iter().map(|&e| matching.eq_to_var[e].expect("perfect")).collect();
            vars.sort_unstable();
            Block { eqs, vars }
        })
        .collect();
    Ok(SolvePlan { blocks })
}

/// Iterative Tarjan SCC; components are returned in completion order.
fn tarjan(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, i)) = call.last() {
            if i < succ[v].len() {
                call.last_mut().unwrap().1 += 1;
                let w = succ[v][i];
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                out.push(comp);
            }
        }
    }
    out
}

impl SolvePlan {
    /// Position of the block that determines each variable.
    pub fn block_of_var(&self, n_vars: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_vars];
        for (b, block) in self.blocks.iter().enumerate() {
            for &v in &block.vars {
                out[v] = Some(b);
            }
        }
        out
    }
}

/// Solves the blocks in order, each by Newton on its own equations over its
/// own variables with everything else held at current values. Plan indices
/// refer to rows/columns of `system`.
pub fn solve_by_plan(
    system: &ResidualSystem,
    plan: &SolvePlan,
    start: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<f64>, PlanError> {
    let mut x = start.to_vec();
    for (b, block) in plan.blocks.iter().enumerate() {
        let sub = system.select(&block.eqs);
        let res = newton_solve_masked(&sub, &x, &block.vars, opts);
        if !res.converged() {
            return Err(PlanError::BlockFailed {
                block: b,
                message: res.diagnostic.clone().unwrap_or_else(|| format!("{:?}", res.status)),
                result: Box::new(res),
            });
        }
        x = res.x;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structural::max_matching;

    #[test]
    fn single_equation_is_one_block() {
        let g = EquationGraph::from_edges(1, 1, &[(0, 0)]);
        let plan = scc_plan(&g, &max_matching(&g)).unwrap();
        assert_eq!(plan.blocks, vec![Block { eqs: vec![0], vars: vec![0] }]);
    }

    #[test]
    fn coupled_pair_is_one_block() {
        let g = EquationGraph::from_edges(2, 2, &[(0, 0), (0, 1), (1, 0), (1, 1)]);
        let plan = scc_plan(&g, &max_matching(&g)).unwrap();
        assert_eq!(plan.blocks.len(), 1);
        assert_eq!(plan.blocks[0].vars, vec![0, 1]);
    }

    #[test]
    fn triangular_system_orders_dependencies_first() {
        // e0: v0 + v1, e1: v1 + v2, e2: v2.
        let g = EquationGraph::from_edges(3, 3, &[(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)]);
        let plan = scc_plan(&g, &max_matching(&g)).unwrap();
        let order: Vec<Vec<usize>> = plan.blocks.iter().map(|b| b.eqs.clone()).collect();
        assert_eq!(order, vec![vec![2], vec![1], vec![0]]);
    }

    #[test]
    fn rejects_imperfect_matching() {
        let g = EquationGraph::from_edges(2, 1, &[(0, 0), (1, 0)]);
        assert!(matches!(scc_plan(&g, &max_matching(&g)), Err(PlanError::NotPerfect { unmatched_eqs: 1, .. })));
    }
}
