use std::fmt::Write as _;

use serde::Serialize;

use crate::equations::ResidualSystem;
use crate::model::{dof_of, ConstraintKind, EntityKind, Model};

/// Bipartite graph between equations (left) and variables (right).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquationGraph {
    pub eq_labels: Vec<String>,
    pub var_labels: Vec<String>,
    /// Sorted variable indices per equation.
    pub adj: Vec<Vec<usize>>,
}

impl EquationGraph {
    /// Edge iff the variable occurs in the residual's expression tree.
    pub fn from_system(system: &ResidualSystem) -> Self {
        Self {
            eq_labels: system.residuals.iter().map(|r| r.label.clone()).collect(),
            var_labels: system.variable_names(),
            adj: system.residuals.iter().map(|r| r.expr.vars().into_iter().collect()).collect(),
        }
    }

    /// Graph with generated labels `e<i>` / `v<j>`.
    pub fn from_edges(n_eqs: usize, n_vars: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n_eqs];
        for &(e, v) in edges {
            assert!(e < n_eqs && v < n_vars, "edge ({e}, {v}) out of range");
            adj[e].push(v);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        Self {
            eq_labels: (0..n_eqs).map(|i| format!("e{i}")).collect(),
            var_labels: (0..n_vars).map(|j| format!("v{j}")).collect(),
            adj,
        }
    }

    pub fn num_eqs(&self) -> usize {
        self.adj.len()
    }

    pub fn num_vars(&self) -> usize {
        self.var_labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    /// Equations adjacent to each variable.
    pub fn var_adjacency(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_vars()];
        for (e, vars) in self.adj.iter().enumerate() {
            for &v in vars {
                out[v].push(e);
            }
        }
        out
    }

    /// Subgraph induced by the given equations and variables; indices are
    /// renumbered in the order given.
    pub fn subgraph(&self, eqs: &[usize], vars: &[usize]) -> EquationGraph {
        let mut var_pos = vec![usize::MAX; self.num_vars()];
        for (k, &v) in vars.iter().enumerate() {
            var_pos[v] = k;
        }
        EquationGraph {
            eq_labels: eqs.iter().map(|&e| self.eq_labels[e].clone()).collect(),
            var_labels: vars.iter().map(|&v| self.var_labels[v].clone()).collect(),
            adj: eqs
                .iter()
                .map(|&e| {
                    let mut a: Vec<usize> =
                        self.adj[e].iter().filter(|&&v| var_pos[v] != usize::MAX).map(|&v| var_pos[v]).collect();
                    a.sort_unstable();
                    a
                })
                .collect(),
        }
    }

    /// Plain-text adjacency list: one line per equation node, the node name
    /// followed by its variable neighbours, whitespace separated.
    pub fn to_adjlist(&self) -> String {
        let mut s = String::from("# bipartite equation graph: equation variable...\n");
        for (e, vars) in self.adj.iter().enumerate() {
            s.push_str(&self.eq_labels[e]);
            for &v in vars {
                let _ = write!(s, " {}", self.var_labels[v]);
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityNode {
    pub id: String,
    pub kind: EntityKind,
    pub dof: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintNode {
    pub id: String,
    pub kind: ConstraintKind,
    pub doc: usize,
    /// Entity node indices.
    pub operands: Vec<usize>,
}

impl ConstraintNode {
    /// Fixes the global frame rather than relating entities to each other.
    pub fn is_grounding(&self) -> bool {
        self.kind == ConstraintKind::Fix
    }
}

/// Entities weighted by DOF and constraint nodes weighted by DOC, in the
/// bipartite (entity–constraint) form so constraints of any arity are
/// uniform.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintGraph {
    pub dimension: u8,
    pub entities: Vec<EntityNode>,
    pub constraints: Vec<ConstraintNode>,
}

impl ConstraintGraph {
    /// Built from a validated model; unresolvable constraints are skipped.
    pub fn from_model(model: &Model) -> Self {
        let entities =
            model.entities.iter().map(|e| EntityNode { id: e.id.clone(), kind: e.kind, dof: dof_of(e.kind) }).collect();
        let constraints = model
            .constraints
            .iter()
            .filter_map(|c| {
                Some(ConstraintNode {
                    id: c.id.clone(),
                    kind: c.kind,
                    doc: model.constraint_doc(c).ok()?,
                    operands: model.operands(c)?,
                })
            })
            .collect();
        Self { dimension: model.dimension, entities, constraints }
    }

    pub fn total_dof(&self) -> usize {
        self.entities.iter().map(|e| e.dof).sum()
    }

    pub fn total_doc(&self) -> usize {
        self.constraints.iter().map(|c| c.doc).sum()
    }

    /// Constraint indices whose operands all lie in `mask`.
    pub fn induced_constraints(&self, mask: &[bool]) -> Vec<usize> {
        (0..self.constraints.len()).filter(|&k| self.constraints[k].operands.iter().all(|&e| mask[e])).collect()
    }

    /// Entity adjacency through shared constraints.
    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.entities.len()];
        for c in &self.constraints {
            for &a in &c.operands {
                for &b in &c.operands {
                    if a != b {
                        nb[a].push(b);
                    }
                }
            }
        }
        for n in &mut nb {
            n.sort_unstable();
            n.dedup();
        }
        nb
    }

    /// Whether the entities in `mask` form one component using only
    /// constraints induced by `mask`.
    pub fn is_connected(&self, mask: &[bool]) -> bool {
        let members: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        let Some(&first) = members.first() else { return false };
        let induced = self.induced_constraints(mask);
        let mut parent: Vec<usize> = (0..mask.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for k in induced {
            let ops = &self.constraints[k].operands;
            for w in ops.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                parent[a] = b;
            }
        }
        let root = find(&mut parent, first);
        members.iter().all(|&m| find(&mut parent, m) == root)
    }

    /// Plain-text adjacency list of the bipartite entity–constraint graph.
    pub fn to_adjlist(&self) -> String {
        let mut s = String::from("# constraint graph: constraint[doc] entity[dof]...\n");
        for c in &self.constraints {
            let _ = write!(s, "{}[{}]", c.id, c.doc);
            for &e in &c.operands {
                let _ = write!(s, " {}[{}]", self.entities[e].id, self.entities[e].dof);
            }
            s.push('\n');
        }
        s
    }
}

pub fn build_graphs(system: &ResidualSystem, model: &Model) -> (EquationGraph, ConstraintGraph) {
    (EquationGraph::from_system(system), ConstraintGraph::from_model(model))
}
