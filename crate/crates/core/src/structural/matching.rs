use std::collections::VecDeque;

use serde::Serialize;

use super::graphs::EquationGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Matching {
    pub eq_to_var: Vec<Option<usize>>,
    pub var_to_eq: Vec<Option<usize>>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.eq_to_var.iter().flatten().count()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.eq_to_var.iter().enumerate().filter_map(|(e, v)| v.map(|v| (e, v))).collect()
    }

    pub fn is_perfect(&self) -> bool {
        self.eq_to_var.iter().all(Option::is_some) && self.var_to_eq.iter().all(Option::is_some)
    }
}

pub fn max_matching(g: &EquationGraph) -> Matching {
    let order: Vec<usize> = (0..g.num_eqs()).collect();
    max_matching_ordered(g, &order)
}

/// Augmenting-path (Kuhn) maximum matching, trying equations in `eq_order`
/// and their variables in ascending index order.
pub fn max_matching_ordered(g: &EquationGraph, eq_order: &[usize]) -> Matching {
    let mut m = Matching { eq_to_var: vec![None; g.num_eqs()], var_to_eq: vec![None; g.num_vars()] };
    for &e in eq_order {
        let mut seen = vec![false; g.num_vars()];
        augment(g, e, &mut seen, &mut m);
    }
    m
}

fn augment(g: &EquationGraph, root: usize, seen: &mut [bool], m: &mut Matching) -> bool {
    // Iterative DFS over (equation, next-neighbour cursor) frames.
    let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
    let mut via: Vec<usize> = Vec::new();
    while let Some(&mut (e, ref mut cursor)) = stack.last_mut() {
        if *cursor >= g.adj[e].len() {
            stack.pop();
            via.pop();
            continue;
        }
        let v = g.adj[e][*cursor];
        *cursor += 1;
        if seen[v] {
            continue;
        }
        seen[v] = true;
        match m.var_to_eq[v] {
            None => {
                // Flip the path: each stacked equation takes the variable
                // through which the next frame was entered.
                via.push(v);
                for (k, &(eq, _)) in stack.iter().enumerate() {
                    let var = via[k];
                    m.eq_to_var[eq] = Some(var);
                    m.var_to_eq[var] = Some(eq);
                }
                return true;
            }
            Some(next) => {
                via.push(v);
                stack.push((next, 0));
            }
        }
    }
    false
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DmPart {
    pub eqs: Vec<usize>,
    pub vars: Vec<usize>,
}

impl DmPart {
    pub fn is_empty(&self) -> bool {
        self.eqs.is_empty() && self.vars.is_empty()
    }
}

/// Verdict of the saturation criterion on a maximum matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Saturation {
    Well,
    Over,
    Under,
    OverAndUnder,
}

/// Coarse Dulmage-Mendelsohn decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DmPartition {
    pub over: DmPart,
    pub well: DmPart,
    pub under: DmPart,
    /// The maximum matching the partition was derived from.
    pub matching: Matching,
    pub unsaturated_eqs: Vec<usize>,
    pub unsaturated_vars: Vec<usize>,
    pub saturation: Saturation,
}

pub fn dm_decompose(g: &EquationGraph) -> DmPartition {
    dm_decompose_with(g, max_matching(g))
}

/// Partition from a given maximum matching: the over part is everything
/// reachable from unmatched equations along alternating paths, the under
/// part everything reachable from unmatched variables. The result does not
/// depend on which maximum matching is supplied.
pub fn dm_decompose_with(g: &EquationGraph, matching: Matching) -> DmPartition {
    let (ne, nv) = (g.num_eqs(), g.num_vars());
    let var_adj = g.var_adjacency();
    let unsaturated_eqs: Vec<usize> = (0..ne).filter(|&e| matching.eq_to_var[e].is_none()).collect();
    let unsaturated_vars: Vec<usize> = (0..nv).filter(|&v| matching.var_to_eq[v].is_none()).collect();

    // Over: eq -(any edge)-> var -(matched)-> eq.
    let mut over_e = vec![false; ne];
    let mut over_v = vec![false; nv];
    let mut queue: VecDeque<usize> = unsaturated_eqs.iter().copied().collect();
    for &e in &unsaturated_eqs {
        over_e[e] = true;
    }
    while let Some(e) = queue.pop_front() {
        for &v in &g.adj[e] {
            if !over_v[v] {
                over_v[v] = true;
                if let Some(e2) = matching.var_to_eq[v] {
                    if !over_e[e2] {
                        over_e[e2] = true;
                        queue.push_back(e2);
                    }
                }
            }
        }
    }

    // Under: var -(any edge)-> eq -(matched)-> var.
    let mut under_e = vec![false; ne];
    let mut under_v = vec![false; nv];
    let mut queue: VecDeque<usize> = unsaturated_vars.iter().copied().collect();
    for &v in &unsaturated_vars {
        under_v[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &e in &var_adj[v] {
            if !under_e[e] {
                under_e[e] = true;
                if let Some(v2) = matching.eq_to_var[e] {
                    if !under_v[v2] {
                        under_v[v2] = true;
                        queue.push_back(v2);
                    }
                }
            }
        }
    }

    let collect = |mask: &[bool]| (0..mask.len()).filter(|&i| mask[i]).collect::<Vec<_>>();
    let over = DmPart { eqs: collect(&over_e), vars: collect(&over_v) };
    let under = DmPart { eqs: collect(&under_e), vars: collect(&under_v) };
    let well = DmPart {
        eqs: (0..ne).filter(|&e| !over_e[e] && !under_e[e]).collect(),
        vars: (0..nv).filter(|&v| !over_v[v] && !under_v[v]).collect(),
    };
    let saturation = match (unsaturated_eqs.is_empty(), unsaturated_vars.is_empty()) {
        (true, true) => Saturation::Well,
        (false, true) => Saturation::Over,
        (true, false) => Saturation::Under,
        (false, false) => Saturation::OverAndUnder,
    };
    DmPartition { over, well, under, matching, unsaturated_eqs, unsaturated_vars, saturation }
}

impl DmPartition {
    /// The well part as its own graph together with the restricted
    /// (perfect) matching, plus the maps back to original indices.
    pub fn well_graph(&self, g: &EquationGraph) -> (EquationGraph, Matching, Vec<usize>, Vec<usize>) {
        let sub = g.subgraph(&self.well.eqs, &self.well.vars);
        let mut var_pos = vec![usize::MAX; g.num_vars()];
        for (k, &v) in self.well.vars.iter().enumerate() {
            var_pos[v] = k;
        }
        let mut m = Matching { eq_to_var: vec![None; sub.num_eqs()], var_to_eq: vec![None; sub.num_vars()] };
        for (k, &e) in self.well.eqs.iter().enumerate() {
            if let Some(v) = self.matching.eq_to_var[e] {
                let pos = var_pos[v];
                if pos != usize::MAX {
                    m.eq_to_var[k] = Some(pos);
                    m.var_to_eq[pos] = Some(k);
                }
            }
        }
        (sub, m, self.well.eqs.clone(), self.well.vars.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph() {
        let g = EquationGraph::from_edges(0, 0, &[]);
        assert_eq!(max_matching(&g).size(), 0);
        assert_eq!(dm_decompose(&g).saturation, Saturation::Well);
    }

    #[test]
    fn augmenting_path_reroutes() {
        // e0: {v0, v1}, e1: {v0}. Greedy e0→v0 must be rerouted.
        let g = EquationGraph::from_edges(2, 2, &[(0, 0), (0, 1), (1, 0)]);
        let m = max_matching(&g);
        assert_eq!(m.size(), 2);
        assert_eq!(m.eq_to_var, vec![Some(1), Some(0)]);
    }

    #[test]
    fn over_and_under_example() {
        // x=0, x=1, y+z=1 with x=v0, y=v1, z=v2.
        let g = EquationGraph::from_edges(3, 3, &[(0, 0), (1, 0), (2, 1), (2, 2)]);
        let p = dm_decompose(&g);
        assert_eq!(p.over, DmPart { eqs: vec![0, 1], vars: vec![0] });
        assert_eq!(p.under, DmPart { eqs: vec![2], vars: vec![1, 2] });
        assert!(p.well.is_empty());
        assert_eq!(p.saturation, Saturation::OverAndUnder);
    }
}
