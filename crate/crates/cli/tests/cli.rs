use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn gcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcs")).args(args).env_remove("GCS_SEED").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut all = vec!["--format", "json"];
    all.extend_from_slice(args);
    let out = gcs(&all);
    (serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {:?}", out)), code(&out))
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    for (name, want) in [
        ("triangle.json", 0),
        ("fig5b.json", 0),
        ("two-triangles-bridge.json", 3),
        ("k4.json", 4),
        ("three-lines-three-angles.json", 5),
        ("vcm2.json", 4),
    ] {
        let out = gcs(&["check", &fixture(name)]);
        assert_eq!(code(&out), want, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn text_and_json_agree_on_the_verdict() {
    for name in ["triangle.json", "k4.json", "two-triangles-bridge.json"] {
        let text = String::from_utf8(gcs(&["check", &fixture(name)]).stdout).unwrap();
        let (report, _) = json(&["check", &fixture(name)]);
        let verdict = report["verdict"].as_str().unwrap();
        assert!(text.starts_with(&format!("verdict: {verdict}\n")), "{name}: {text}");
    }
}

#[test]
fn json_output_is_reproducible() {
    for args in [["check", "k4.json"], ["detect", "seed-chain.json"], ["decompose", "corpus/c10-strip10.json"]] {
        let path = fixture(args[1]);
        let a = gcs(&["--format", "json", args[0], &path]);
        let b = gcs(&["--format", "json", args[0], &path]);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn seed_comes_from_the_environment_when_set() {
    let path = fixture("triangle.json");
    let out = Command::new(env!("CARGO_BIN_EXE_gcs"))
        .args(["--format", "json", "--seed", "3", "check", &path])
        .env("GCS_SEED", "17")
        .output()
        .unwrap();
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["seed"], 17);
    let (report, _) = json(&["--seed", "3", "check", &path]);
    assert_eq!(report["seed"], 3);
    let bad = Command::new(env!("CARGO_BIN_EXE_gcs")).args(["check", &path]).env("GCS_SEED", "x").output().unwrap();
    assert_eq!(code(&bad), 1);
}

#[test]
fn malformed_input_reports_position_and_exits_1() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(file, "{{\n  \"dimension\": 2,\n  \"entities\": [,]\n}}").unwrap();
    let out = gcs(&["check", file.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains(":3:"), "{err}");
    assert_eq!(code(&gcs(&["check", "/nonexistent/model.json"])), 1);
    assert_eq!(code(&gcs(&["frobnicate"])), 1);
}

#[test]
fn invalid_model_names_the_offending_line() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(
        file,
        r#"{{
  "dimension": 2,
  "entities": [{{"id": "P1", "kind": "point2"}}],
  "constraints": [
    {{"id": "d1", "kind": "distance-pp", "entities": ["P1", "Q"], "value": 1.0}}
  ]
}}"#
    )
    .unwrap();
    let out = gcs(&["check", file.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains(":5:"), "{err}");
}

#[test]
fn detect_reports_the_two_row_circuit() {
    let (report, exit) = json(&["detect", &fixture("vcm2.json")]);
    assert_eq!(exit, 4);
    let oracle: Vec<Vec<String>> = serde_json::from_value(report["oracle"]["dependencyGroups"].clone()).unwrap();
    assert!(oracle.contains(&vec!["E4".to_string(), "E5".to_string()]), "{report}");
}

#[test]
fn decompose_prints_cluster_trees() {
    let (tree, exit) = json(&["decompose", &fixture("fig5b.json")]);
    assert_eq!(exit, 0);
    assert_eq!(tree["tree"]["roots"][0]["node"], "merge");
    assert_eq!(tree["tree"]["roots"][0]["shared"], serde_json::json!(["P2", "P4"]));

    let out = gcs(&["--format", "json", "--strategy", "top-down", "decompose", &fixture("k4.json")]);
    assert_eq!(code(&out), 4);
    let tree: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(tree["tree"]["roots"][0]["node"], "irreducible");
    assert!(!out.stderr.is_empty());

    assert_eq!(code(&gcs(&["--strategy", "direct", "decompose", &fixture("fig5b.json")])), 1);
}

#[test]
fn decomposed_solve_agrees_with_direct_solve() {
    let path = fixture("corpus/c07-three-triangles.json");
    let (direct, a) = json(&["--strategy", "direct", "solve", &path]);
    let (decomposed, b) = json(&["--strategy", "decomposed", "solve", &path]);
    assert_eq!((a, b), (0, 0));
    assert_eq!(direct["status"], "converged");
    assert_eq!(decomposed["status"], "converged");
    // Pairwise distances are frame independent.
    let pts = |v: &Value| -> Vec<(f64, f64)> {
        v["entities"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (e["params"][0].as_f64().unwrap(), e["params"][1].as_f64().unwrap()))
            .collect()
    };
    let (p, q) = (pts(&direct), pts(&decomposed));
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let d = |s: &[(f64, f64)]| ((s[i].0 - s[j].0).powi(2) + (s[i].1 - s[j].1).powi(2)).sqrt();
            assert!((d(&p) - d(&q)).abs() < 1e-7);
        }
    }
}

#[test]
fn solve_exit_codes() {
    assert_eq!(code(&gcs(&["solve", &fixture("triangle.json")])), 0);
    let (report, exit) = json(&["solve", &fixture("inconsistent.json")]);
    assert_eq!(exit, 4);
    assert_eq!(report["status"], "inconsistent");
    assert!(!report["certificate"].as_array().unwrap().is_empty());
    // Not well-constrained: refused with the verdict's code.
    assert_eq!(code(&gcs(&["solve", &fixture("two-triangles-bridge.json")])), 3);
}

#[test]
fn help_exits_0() {
    assert_eq!(code(&gcs(&["--help"])), 0);
    assert_eq!(code(&gcs(&["check", "--help"])), 0);
}
