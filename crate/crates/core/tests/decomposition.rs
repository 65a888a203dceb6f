mod common;

use std::collections::BTreeSet;

use common::{aligned_deviation, corpus, fixture, points};
use gcs_core::decomposition::{
    bottom_up, initial_guess, place_on_shared, solve_anchored, solve_tree, top_down, AlignError, ClusterNode,
    DecompositionError, MergeRule, Positions,
};
use gcs_core::equations::compile;
use gcs_core::model::Model;
use gcs_core::numeric::SolveOptions;
use gcs_core::witness::{analyze, Verdict};

fn constraint_indices(model: &Model, ids: &[String]) -> Vec<usize> {
    ids.iter().filter_map(|id| model.constraints.iter().position(|c| &c.id == id)).collect()
}

fn entity_indices(model: &Model, ids: &[String]) -> Vec<usize> {
    ids.iter().map(|id| model.entity_index(id).unwrap()).collect()
}

fn all_nodes(node: &ClusterNode) -> Vec<&ClusterNode> {
    let mut out = vec![node];
    for c in node.children() {
        out.extend(all_nodes(c));
    }
    out
}

#[test]
fn fig5b_bottom_up_merges_two_triangles_on_the_diagonal() {
    let m = fixture("fig5b.json");
    let tree = bottom_up(&m, 0).unwrap();
    assert!(tree.is_complete());
    let ClusterNode::Merge { rule, shared, children, .. } = &tree.roots[0] else { panic!("{tree:?}") };
    assert_eq!(*rule, MergeRule::Pair);
    assert_eq!(shared, &["P2", "P4"]);
    assert_eq!(children.len(), 2);
    let leaves: BTreeSet<Vec<String>> = children.iter().map(|c| c.entities().to_vec()).collect();
    assert!(leaves.contains(&vec!["P1".to_string(), "P2".into(), "P4".into()]));
    assert!(leaves.contains(&vec!["P2".to_string(), "P3".into(), "P4".into()]));
}

#[test]
fn single_triangle_is_one_leaf() {
    let m = fixture("corpus/c01-triangle.json");
    for tree in [bottom_up(&m, 0).unwrap(), top_down(&m)] {
        assert!(tree.is_complete());
        assert!(matches!(tree.roots[0], ClusterNode::Leaf { .. }), "{tree:?}");
    }
}

#[test]
fn k4_bottom_up_leaves_a_redundant_distance() {
    let m = fixture("k4.json");
    let tree = bottom_up(&m, 0).unwrap();
    assert!(!tree.is_complete());
    assert_eq!(tree.leftover_constraints.len(), 1);
    assert!(tree.uncovered_entities.is_empty());
}

#[test]
fn k4_top_down_is_irreducible() {
    let tree = top_down(&fixture("k4.json"));
    assert_eq!(tree.roots.len(), 1);
    assert!(matches!(tree.roots[0], ClusterNode::Irreducible { .. }));
}

#[test]
fn fig5b_top_down_splits_at_the_diagonal() {
    let tree = top_down(&fixture("fig5b.json"));
    assert!(tree.is_complete());
    let ClusterNode::Split { pair, donor, bond, children, .. } = &tree.roots[0] else { panic!("{tree:?}") };
    let mut pair = pair.to_vec();
    pair.sort();
    assert_eq!(pair, ["P2", "P4"]);
    assert!(bond.id.starts_with("vb:"));
    assert_eq!(children.len(), 2);
    assert!(*donor < 2);
}

#[test]
fn split_children_share_only_the_pair_and_carry_the_bond() {
    for name in corpus() {
        let m = fixture(&name);
        let tree = top_down(&m);
        for node in tree.roots.iter().flat_map(all_nodes) {
            let ClusterNode::Split { pair, donor, bond, children, .. } = node else { continue };
            let a: BTreeSet<&String> = children[0].entities().iter().collect();
            let b: BTreeSet<&String> = children[1].entities().iter().collect();
            let common: BTreeSet<&String> = a.intersection(&b).copied().collect();
            assert_eq!(common, pair.iter().collect(), "{name}");
            // The receiver needs the bond, the donor does not.
            let receiver = &children[1 - donor];
            let has_bond =
                |n: &ClusterNode| all_nodes(n).iter().any(|x| leaf_constraints(x).iter().any(|c| c == &bond.id));
            assert!(has_bond(receiver), "{name}");
            assert!(!has_bond(&children[*donor]), "{name}");
        }
    }
}

fn leaf_constraints(node: &ClusterNode) -> Vec<String> {
    match node {
        ClusterNode::Leaf { constraints, .. } | ClusterNode::Irreducible { constraints, .. } => constraints.clone(),
        _ => Vec::new(),
    }
}

#[test]
fn bottom_up_clusters_are_well_constrained() {
    for name in corpus() {
        let m = fixture(&name);
        let tree = bottom_up(&m, 0).unwrap();
        for node in tree.roots.iter().flat_map(all_nodes) {
            let (ClusterNode::Leaf { entities, constraints } | ClusterNode::Merge { entities, constraints, .. }) = node
            else {
                continue;
            };
            let sub = m.subsystem(&entity_indices(&m, entities), &constraint_indices(&m, constraints));
            let report = analyze(&compile(&sub).unwrap(), 11, 3).unwrap();
            assert_eq!(report.verdict, Verdict::Well, "{name}: {entities:?}");
        }
    }
}

#[test]
fn leaves_cover_every_constraint() {
    for name in corpus() {
        let m = fixture(&name);
        for tree in [bottom_up(&m, 0).unwrap(), top_down(&m)] {
            let mut seen: Vec<String> = tree
                .roots
                .iter()
                .flat_map(|r| r.leaves())
                .flat_map(leaf_constraints)
                .filter(|c| !c.starts_with("vb:"))
                .collect();
            seen.sort();
            // Bottom-up leaves may share an edge; top-down leaves partition.
            if tree.strategy == gcs_core::decomposition::Strategy::BottomUp {
                seen.dedup();
            }
            let mut want: Vec<String> = m.constraints.iter().map(|c| c.id.clone()).collect();
            want.sort();
            assert_eq!(seen, want, "{name} {:?}", tree.strategy);
        }
    }
}

#[test]
fn recombined_solution_matches_direct_solve() {
    let opts = SolveOptions::default();
    for name in ["fig5b.json", "corpus/c07-three-triangles.json", "corpus/c12-heptagon.json"] {
        let m = fixture(name);
        let direct = solve_anchored(&m, &opts).unwrap();
        assert!(direct.result.converged(), "{name}");
        for tree in [bottom_up(&m, 0).unwrap(), top_down(&m)] {
            let plan = solve_tree(&tree, &m, &opts).unwrap();
            assert!(plan.residual_norm < 1e-8, "{name}: {}", plan.residual_norm);
            assert!(aligned_deviation(&points(&plan.x), &points(&direct.result.x)) < 1e-7, "{name}");
        }
    }
}

#[test]
fn recombination_works_from_a_random_start() {
    let m = fixture("corpus/c06-bowtie.json");
    let mut bare = m.clone();
    for e in &mut bare.entities {
        e.params = None;
    }
    let start = initial_guess(&bare, 5);
    let tree = bottom_up(&start, 0).unwrap();
    let plan = solve_tree(&tree, &start, &SolveOptions::default()).unwrap();
    assert!(plan.residual_norm < 1e-8);
}

#[test]
fn one_cluster_tree_has_identity_placement() {
    let m = fixture("corpus/c01-triangle.json");
    let plan = solve_tree(&bottom_up(&m, 0).unwrap(), &m, &SolveOptions::default()).unwrap();
    assert_eq!(plan.placements.len(), 1);
    assert!(plan.placements[0].angle.abs() < 1e-12);
    assert!(plan.placements[0].translation.iter().all(|t| t.abs() < 1e-12));
    assert!(plan.bonds.is_empty());
}

#[test]
fn split_bond_value_is_measured_from_the_donor() {
    let m = fixture("fig5b.json");
    let plan = solve_tree(&top_down(&m), &m, &SolveOptions::default()).unwrap();
    assert_eq!(plan.bonds.len(), 1);
    let d5 = m.constraints.iter().find(|c| c.id == "d5").unwrap().value.unwrap();
    assert!((plan.bonds[0].1 - d5).abs() < 1e-9, "{:?}", plan.bonds);
}

#[test]
fn incomplete_tree_is_refused() {
    let m = fixture("k4.json");
    let err = solve_tree(&bottom_up(&m, 0).unwrap(), &m, &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, DecompositionError::Incomplete));
}

#[test]
fn inconsistent_shared_points_are_reported() {
    let m = fixture("fig5b.json");
    let pos = |dx: f64| -> Positions {
        [("P2".to_string(), vec![10.0, 0.0]), ("P4".to_string(), vec![0.0, 9.0 + dx])].into_iter().collect()
    };
    let shared = vec!["P2".to_string(), "P4".to_string()];
    let target = pos(0.0);
    assert!(place_on_shared(&m, &target, &pos(0.0), &shared).is_ok());
    // A moving cluster whose shared points are 0.5 further apart.
    let err = place_on_shared(&m, &target, &pos(0.5), &shared).unwrap_err();
    assert!(matches!(err, AlignError::Mismatch { residual } if residual > 0.1));
    let err = place_on_shared(&m, &target, &pos(0.0), &shared[..1]).unwrap_err();
    assert!(matches!(err, AlignError::TooFewPoints { needed: 2, got: 1 }));
}

#[test]
fn out_of_scope_models_are_one_irreducible_cluster() {
    for name in ["three-lines-three-angles.json", "plane-example.json"] {
        let m = fixture(name);
        for tree in [bottom_up(&m, 0).unwrap(), top_down(&m)] {
            assert_eq!(tree.roots.len(), 1, "{name}");
            assert!(matches!(tree.roots[0], ClusterNode::Irreducible { .. }), "{name}");
        }
    }
}

#[test]
fn decomposition_is_deterministic() {
    let m = fixture("corpus/c10-strip10.json");
    assert_eq!(bottom_up(&m, 0).unwrap(), bottom_up(&m, 0).unwrap());
    assert_eq!(top_down(&m), top_down(&m));
}
