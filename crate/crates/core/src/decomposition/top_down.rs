use std::collections::BTreeSet;

use super::{in_point_distance_scope, whole, ClusterNode, ClusterTree, Strategy, VirtualBond};
use crate::model::Model;

#[derive(Clone)]
struct Edge {
    a: usize,
    b: usize,
    id: String,
}

/// Recursively splits the constraint graph at the first separating point
/// pair (brute force, index order). The side that keeps `2n − 3` edges is
/// the donor; the other side receives a virtual distance bond between the
/// pair, valued from the donor's solution. Triangles and single distances
/// are leaves; graphs without a separating pair are irreducible.
pub fn top_down(model: &Model) -> ClusterTree {
    if !in_point_distance_scope(model) {
        return whole(model, Strategy::TopDown, "outside the point-distance rule scope");
    }
    let n = model.entities.len();
    let edges: Vec<Edge> = model
        .constraints
        .iter()
        .map(|c| {
            let ops = model.operands(c).expect("validated");
            Edge { a: ops[0], b: ops[1], id: c.id.clone() }
        })
        .collect();
    let vertices: Vec<usize> = (0..n).collect();
    if n < 2 || edges.len() + 3 != 2 * n || !connected(&vertices, &edges, &[]) {
        return whole(model, Strategy::TopDown, "constraint graph is not a minimally rigid count");
    }
    ClusterTree {
        strategy: Strategy::TopDown,
        roots: vec![split(model, &vertices, &edges)],
        leftover_constraints: Vec::new(),
        uncovered_entities: Vec::new(),
    }
}

fn names(model: &Model, vs: &[usize]) -> Vec<String> {
    vs.iter().map(|&v| model.entities[v].id.clone()).collect()
}

fn split(model: &Model, vertices: &[usize], edges: &[Edge]) -> ClusterNode {
    let constraints = || edges.iter().map(|e| e.id.clone()).collect::<Vec<_>>();
    if vertices.len() <= 3 {
        return ClusterNode::Leaf { entities: names(model, vertices), constraints: constraints() };
    }
    for (p, &a) in vertices.iter().enumerate() {
        for &b in &vertices[p + 1..] {
            let comps = components(vertices, edges, &[a, b]);
            if comps.len() < 2 {
                continue;
            }
            let first: BTreeSet<usize> = comps[0].iter().copied().chain([a, b]).collect();
            let second: BTreeSet<usize> = comps[1..].iter().flatten().copied().chain([a, b]).collect();
            if let Some(node) = try_split(model, vertices, edges, a, b, &first, &second) {
                return node;
            }
        }
    }
    ClusterNode::Irreducible {
        entities: names(model, vertices),
        constraints: constraints(),
        reason: "no separating point pair".into(),
    }
}

fn try_split(
    model: &Model,
    vertices: &[usize],
    edges: &[Edge],
    a: usize,
    b: usize,
    first: &BTreeSet<usize>,
    second: &BTreeSet<usize>,
) -> Option<ClusterNode> {
    let is_ab = |e: &Edge| (e.a == a && e.b == b) || (e.a == b && e.b == a);
    let ab: Option<&Edge> = edges.iter().find(|e| is_ab(e));
    let side = |s: &BTreeSet<usize>| -> Vec<Edge> {
        edges.iter().filter(|e| !is_ab(e) && s.contains(&e.a) && s.contains(&e.b)).cloned().collect()
    };
    let (mut e1, mut e2) = (side(first), side(second));
    let rigid = |s: &BTreeSet<usize>, e: usize| e + 3 == 2 * s.len();
    let donor = if rigid(first, e1.len() + usize::from(ab.is_some())) {
        e1.extend(ab.cloned());
        0
    } else if rigid(second, e2.len() + usize::from(ab.is_some())) {
        e2.extend(ab.cloned());
        1
    } else {
        return None;
    };
    let (ea, eb) = (&model.entities[a].id, &model.entities[b].id);
    let bond = VirtualBond { id: format!("vb:{ea}-{eb}"), between: [ea.clone(), eb.clone()] };
    let receiver_edges = if donor == 0 { &mut e2 } else { &mut e1 };
    receiver_edges.push(Edge { a, b, id: bond.id.clone() });
    let (v1, v2): (Vec<usize>, Vec<usize>) = (first.iter().copied().collect(), second.iter().copied().collect());
    if !rigid(first, e1.len()) || !rigid(second, e2.len()) {
        return None;
    }
    let children = vec![split(model, &v1, &e1), split(model, &v2, &e2)];
    Some(ClusterNode::Split { pair: [ea.clone(), eb.clone()], donor, bond, entities: names(model, vertices), children })
}

/// Connected components of `vertices` minus `removed`, each sorted, in
/// order of their smallest vertex.
fn components(vertices: &[usize], edges: &[Edge], removed: &[usize]) -> Vec<Vec<usize>> {
    let live: Vec<usize> = vertices.iter().copied().filter(|v| !removed.contains(v)).collect();
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut out = Vec::new();
    for &s in &live {
        if seen.contains(&s) {
            continue;
        }
        let mut comp = vec![s];
        seen.insert(s);
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for e in edges {
                let w = if e.a == v {
                    e.b
                } else if e.b == v {
                    e.a
                } else {
                    continue;
                };
                if !removed.contains(&w) && seen.insert(w) {
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn connected(vertices: &[usize], edges: &[Edge], removed: &[usize]) -> bool {
    components(vertices, edges, removed).len() <= 1
}
