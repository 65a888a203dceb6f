use std::collections::{BTreeSet, HashSet};

use super::{constraint_ids, ids, in_point_distance_scope, whole, ClusterNode, ClusterTree, MergeRule, Strategy};
use crate::equations::compile;
use crate::model::Model;
use crate::witness::{generate_witnesses, SubsystemChecker, Verdict, WitnessError, DEFAULT_ATTEMPTS};

struct Cluster {
    entities: BTreeSet<usize>,
    constraints: BTreeSet<usize>,
    node: ClusterNode,
    alive: bool,
}

/// Merges rigid clusters starting from triangles (and single distances not
/// covered by a triangle). Pair merges (two clusters sharing at least two
/// points) are tried before triple merges (three clusters pairwise sharing
/// one distinct point). Every merge must be well-constrained at witnesses
/// of the whole system; rejected candidates are not retried. A cluster
/// contained in a merged one is absorbed into it.
pub fn bottom_up(model: &Model, seed: u64) -> Result<ClusterTree, WitnessError> {
    if !in_point_distance_scope(model) {
        return Ok(whole(model, Strategy::BottomUp, "outside the point-distance rule scope"));
    }
    let system = compile(model).expect("in-scope model compiles");
    let witnesses =
        if system.num_vars() == 0 { Vec::new() } else { generate_witnesses(&system, seed, 3, DEFAULT_ATTEMPTS)? };
    let checker = SubsystemChecker::new(model, &system, &witnesses);
    let n = model.entities.len();

    // First constraint per point pair; later duplicates stay unclustered.
    let mut edge = vec![vec![None; n]; n];
    for (ci, c) in model.constraints.iter().enumerate() {
        let ops = model.operands(c).expect("validated");
        let (a, b) = (ops[0].min(ops[1]), ops[0].max(ops[1]));
        if a != b && edge[a][b].is_none() {
            edge[a][b] = Some(ci);
            edge[b][a] = Some(ci);
        }
    }

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut in_triangle: HashSet<usize> = HashSet::new();
    let leaf = |model: &Model, es: &BTreeSet<usize>, cs: &BTreeSet<usize>| ClusterNode::Leaf {
        entities: ids(model, es),
        constraints: constraint_ids(model, cs),
    };
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (Some(a), Some(b), Some(c)) = (edge[i][j], edge[j][k], edge[i][k]) else { continue };
                let es: BTreeSet<usize> = [i, j, k].into();
                let cs: BTreeSet<usize> = [a, b, c].into();
                let ev: Vec<usize> = es.iter().copied().collect();
                let cv: Vec<usize> = cs.iter().copied().collect();
                if checker.verdict(&ev, &cv) != Some(Verdict::Well) {
                    continue;
                }
                in_triangle.extend(cs.iter().copied());
                clusters.push(Cluster { node: leaf(model, &es, &cs), entities: es, constraints: cs, alive: true });
            }
        }
    }
    for (i, row) in edge.iter().enumerate() {
        for (j, &e) in row.iter().enumerate().skip(i + 1) {
            let Some(c) = e else { continue };
            if in_triangle.contains(&c) {
                continue;
            }
            let es: BTreeSet<usize> = [i, j].into();
            let cs: BTreeSet<usize> = [c].into();
            clusters.push(Cluster { node: leaf(model, &es, &cs), entities: es, constraints: cs, alive: true });
        }
    }
    absorb_contained(&mut clusters);

    let mut rejected: HashSet<Vec<usize>> = HashSet::new();
    loop {
        let alive: Vec<usize> = (0..clusters.len()).filter(|&i| clusters[i].alive).collect();
        let mut merged = false;
        'pair: for (p, &a) in alive.iter().enumerate() {
            for &b in &alive[p + 1..] {
                let shared: Vec<usize> = clusters[a].entities.intersection(&clusters[b].entities).copied().collect();
                if shared.len() < 2 {
                    continue;
                }
                if try_merge(model, &checker, &mut clusters, &[a, b], shared, MergeRule::Pair, &mut rejected) {
                    merged = true;
                    break 'pair;
                }
            }
        }
        if !merged {
            'triple: for (p, &a) in alive.iter().enumerate() {
                for (q, &b) in alive.iter().enumerate().skip(p + 1) {
                    let Some(sab) = single_shared(&clusters[a].entities, &clusters[b].entities) else { continue };
                    for &c in &alive[q + 1..] {
                        let Some(sac) = single_shared(&clusters[a].entities, &clusters[c].entities) else { continue };
                        let Some(sbc) = single_shared(&clusters[b].entities, &clusters[c].entities) else { continue };
                        if sab == sac || sab == sbc || sac == sbc {
                            continue;
                        }
                        if try_merge(
                            model,
                            &checker,
                            &mut clusters,
                            &[a, b, c],
                            vec![sab, sac, sbc],
                            MergeRule::Triple,
                            &mut rejected,
                        ) {
                            merged = true;
                            break 'triple;
                        }
                    }
                }
            }
        }
        if !merged {
            break;
        }
    }

    let alive: Vec<&Cluster> = clusters.iter().filter(|c| c.alive).collect();
    let covered_c: HashSet<usize> = alive.iter().flat_map(|c| c.constraints.iter().copied()).collect();
    let covered_e: HashSet<usize> = alive.iter().flat_map(|c| c.entities.iter().copied()).collect();
    Ok(ClusterTree {
        strategy: Strategy::BottomUp,
        roots: alive.iter().map(|c| c.node.clone()).collect(),
        leftover_constraints: (0..model.constraints.len())
            .filter(|c| !covered_c.contains(c))
            .map(|c| model.constraints[c].id.clone())
            .collect(),
        uncovered_entities: (0..n).filter(|e| !covered_e.contains(e)).map(|e| model.entities[e].id.clone()).collect(),
    })
}

fn single_shared(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> Option<usize> {
    let mut it = a.intersection(b);
    match (it.next(), it.next()) {
        (Some(&s), None) => Some(s),
        _ => None,
    }
}

fn try_merge(
    model: &Model,
    checker: &SubsystemChecker<'_>,
    clusters: &mut Vec<Cluster>,
    parts: &[usize],
    mut shared: Vec<usize>,
    rule: MergeRule,
    rejected: &mut HashSet<Vec<usize>>,
) -> bool {
    let entities: BTreeSet<usize> = parts.iter().flat_map(|&p| clusters[p].entities.iter().copied()).collect();
    let constraints: BTreeSet<usize> = parts.iter().flat_map(|&p| clusters[p].constraints.iter().copied()).collect();
    let mut key: Vec<usize> = entities.iter().copied().collect();
    key.push(usize::MAX);
    key.extend(constraints.iter().copied());
    if rejected.contains(&key) {
        return false;
    }
    let ev: Vec<usize> = entities.iter().copied().collect();
    let cv: Vec<usize> = constraints.iter().copied().collect();
    if checker.verdict(&ev, &cv) != Some(Verdict::Well) {
        rejected.insert(key);
        return false;
    }
    shared.sort_unstable();
    let node = ClusterNode::Merge {
        rule,
        shared: ids(model, &shared),
        entities: ids(model, &entities),
        constraints: constraint_ids(model, &constraints),
        children: parts.iter().map(|&p| clusters[p].node.clone()).collect(),
    };
    for &p in parts {
        clusters[p].alive = false;
    }
    clusters.push(Cluster { entities, constraints, node, alive: true });
    absorb_contained(clusters);
    true
}

/// Retires clusters whose entities lie inside a later (or larger) cluster.
fn absorb_contained(clusters: &mut [Cluster]) {
    let n = clusters.len();
    for i in 0..n {
        if !clusters[i].alive {
            continue;
        }
        for j in 0..n {
            if i == j || !clusters[j].alive {
                continue;
            }
            let (a, b) = (&clusters[i].entities, &clusters[j].entities);
            if a.is_subset(b) && (a.len() < b.len() || i < j) {
                clusters[i].alive = false;
                break;
            }
        }
    }
}
