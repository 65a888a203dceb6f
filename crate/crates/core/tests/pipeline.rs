mod common;

use common::{fixture, gauss_rank};
use gcs_core::equations::{compile, eval_residuals, parse_linear_system, ResidualSystem};
use gcs_core::numeric::{newton_solve, rank_analyze, SolveOptions, SolveStatus};
use gcs_core::structural::{max_matching, scc_plan, solve_by_plan, EquationGraph};
use nalgebra::DMatrix;
use proptest::prelude::*;
use serde_json::json;

/// Linear system with a nonzero diagonal under a row and column shuffle,
/// so a perfect matching always exists.
fn linear_system(n: usize, coeffs: &[f64], mask: &[bool], perm: &[usize], rhs: &[f64]) -> ResidualSystem {
    let mut equations = Vec::new();
    for (r, b) in rhs.iter().enumerate() {
        let mut row = vec![0.0; n];
        for c in 0..n {
            let k = r * n + c;
            if r == c {
                row[perm[c]] = 1.0 + coeffs[k].abs();
            } else if mask[k] {
                row[perm[c]] = coeffs[k];
            }
        }
        equations.push(json!({"id": format!("e{r}"), "coefficients": row, "rhs": b}));
    }
    let vars: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    parse_linear_system(&json!({"variables": vars, "equations": equations}).to_string()).unwrap()
}

fn system_strategy() -> impl Strategy<Value = ResidualSystem> {
    (2usize..7).prop_flat_map(|n| {
        (
            proptest::collection::vec(-3.0f64..3.0, n * n),
            proptest::collection::vec(proptest::bool::weighted(0.3), n * n),
            Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            proptest::collection::vec(-5.0f64..5.0, n),
        )
            .prop_map(move |(c, m, p, b)| linear_system(n, &c, &m, &p, &b))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plan_blocks_only_look_backwards(system in system_strategy()) {
        let g = EquationGraph::from_system(&system);
        let plan = scc_plan(&g, &max_matching(&g)).unwrap();
        let block_of = plan.block_of_var(g.num_vars());
        for (b, block) in plan.blocks.iter().enumerate() {
            prop_assert_eq!(block.eqs.len(), block.vars.len());
            for &e in &block.eqs {
                for &v in &g.adj[e] {
                    prop_assert!(block_of[v].unwrap() <= b);
                }
            }
        }
        let covered: usize = plan.blocks.iter().map(|b| b.vars.len()).sum();
        prop_assert_eq!(covered, g.num_vars());
    }

    #[test]
    fn plan_solution_satisfies_every_equation(system in system_strategy()) {
        let g = EquationGraph::from_system(&system);
        let plan = scc_plan(&g, &max_matching(&g)).unwrap();
        let start = vec![0.0; g.num_vars()];
        let x = solve_by_plan(&system, &plan, &start, &SolveOptions::default()).unwrap();
        let r = eval_residuals(&system, &x).unwrap();
        prop_assert!(r.iter().all(|v| v.abs() < 1e-8), "{:?}", r);
    }

    #[test]
    fn svd_rank_matches_elimination_rank(
        (m, n, r) in (2usize..8, 2usize..8, 0usize..6),
        seed in proptest::collection::vec(-1.0f64..1.0, 8 * 6 + 6 * 8),
    ) {
        let r = r.min(m).min(n);
        let a = DMatrix::from_fn(m, r, |i, j| seed[i * 6 + j]);
        let b = DMatrix::from_fn(r, n, |i, j| seed[48 + i * 8 + j]);
        let product = &a * &b;
        let svd_rank = rank_analyze(&product).unwrap().rank;
        prop_assert_eq!(svd_rank, gauss_rank(&product, 1e-9));
        prop_assert!(svd_rank <= r);
    }
}

#[test]
fn jacobian_rank_agrees_with_elimination_at_witnesses() {
    use gcs_core::equations::eval_jacobian;
    use gcs_core::witness::{generate_witnesses, DEFAULT_ATTEMPTS};
    for name in ["triangle.json", "k4.json", "fig5b.json", "double-banana.json", "eq3.json"] {
        let s = compile(&fixture(name)).unwrap();
        for w in generate_witnesses(&s, 0, 3, DEFAULT_ATTEMPTS).unwrap() {
            let j = eval_jacobian(&s, &w.x).unwrap();
            assert_eq!(rank_analyze(&j).unwrap().rank, gauss_rank(&j, 1e-9), "{name}");
        }
    }
}

#[test]
fn newton_stops_at_once_on_a_solution() {
    let m = fixture("fig5b.json");
    let s = compile(&m).unwrap();
    let solved = newton_solve(&s, &s.values(), &SolveOptions::default());
    assert!(solved.converged());
    let again = newton_solve(&s, &solved.x, &SolveOptions::default());
    assert_eq!(again.iterations, 0);
    assert_eq!(again.x, solved.x);
}

#[test]
fn inconsistent_model_is_not_reported_as_converged() {
    let s = compile(&fixture("inconsistent.json")).unwrap();
    let res = newton_solve(&s, &s.values(), &SolveOptions::default());
    assert_eq!(res.status, SolveStatus::Inconsistent, "{res:?}");
    assert!(res.residual_norm > 1e-3);
}
