use std::fmt::Write as _;
use std::path::Path;

use gcs_core::decomposition::{
    bottom_up, initial_guess, solve_anchored, solve_tree, top_down, ClusterNode, ClusterTree, DecompositionError,
    Placement,
};
use gcs_core::detection::{
    greedy_dependency_groups, greedy_well_parts, oracle_max_well_part, oracle_min_dependent_sets, DependencyGroup,
    DetectionError, WellPart, ORACLE_ENTITY_CAP, ORACLE_ROW_CAP,
};
use gcs_core::equations::{
    add_anchors, compile, eval_residuals, is_linear_system, parse_linear_system, ResidualSystem,
};
use gcs_core::model::{validate, Model, ModelError};
use gcs_core::numeric::{SolveOptions, SolveStatus};
use gcs_core::structural::{
    counting_state, dm_decompose, ConstraintGraph, CountingMode, CountingReport, DmPart, EquationGraph, Saturation,
    StructuralVerdict,
};
use gcs_core::witness::{characterize_with, generate_witnesses, Verdict, WcmReport, Witness, DEFAULT_ATTEMPTS};
use serde::Serialize;
use serde_json::Value;

use crate::{Mode, StrategyArg};

pub struct RunConfig {
    pub tolerance: f64,
    pub rank_tol: f64,
    pub seed: u64,
    pub witnesses: usize,
    pub mode: Mode,
    pub strategy: Option<StrategyArg>,
    pub max_iter: usize,
}

impl RunConfig {
    fn solve_options(&self) -> SolveOptions {
        SolveOptions { max_iter: self.max_iter, tolerance: self.tolerance, ..SolveOptions::default() }
    }
}

pub enum Outcome {
    Report { json: Value, text: String, notes: Vec<String>, code: u8 },
    Error { messages: Vec<String>, code: u8 },
}

const EXIT_INPUT: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_UNDER: u8 = 3;
const EXIT_OVER: u8 = 4;

fn fail(code: u8, message: impl Into<String>) -> Outcome {
    Outcome::Error { messages: vec![message.into()], code }
}

pub fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Well => 0,
        Verdict::Under => EXIT_UNDER,
        Verdict::Over => EXIT_OVER,
        Verdict::OverAndUnder => 5,
        Verdict::Unstable => 6,
    }
}

fn structural_code(v: StructuralVerdict) -> u8 {
    match v {
        StructuralVerdict::Well => 0,
        StructuralVerdict::Under => EXIT_UNDER,
        StructuralVerdict::Over => EXIT_OVER,
    }
}

fn saturation_code(s: Saturation) -> u8 {
    match s {
        Saturation::Well => 0,
        Saturation::Under => EXIT_UNDER,
        Saturation::Over => EXIT_OVER,
        Saturation::OverAndUnder => 5,
    }
}

fn saturation_name(s: Saturation) -> &'static str {
    match s {
        Saturation::Well => "well",
        Saturation::Under => "under",
        Saturation::Over => "over",
        Saturation::OverAndUnder => "over-and-under",
    }
}

enum Input {
    Model(Model, ResidualSystem),
    Linear(ResidualSystem),
}

impl Input {
    fn system(&self) -> &ResidualSystem {
        match self {
            Input::Model(_, s) | Input::Linear(s) => s,
        }
    }
}

/// Line of the first occurrence of `"id"` in the source, for diagnostics.
fn line_of(source: &str, id: &str) -> Option<usize> {
    let needle = format!("\"{id}\"");
    source.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn load(path: &Path) -> Result<Input, Outcome> {
    let p = path.display();
    let source = std::fs::read_to_string(path).map_err(|e| fail(EXIT_INPUT, format!("{p}: {e}")))?;
    if is_linear_system(&source) {
        return parse_linear_system(&source).map(Input::Linear).map_err(|e| model_error(&p.to_string(), e));
    }
    let model = Model::from_json_str(&source).map_err(|e| model_error(&p.to_string(), e))?;
    let violations = validate(&model);
    if !violations.is_empty() {
        let messages = violations
            .iter()
            .map(|v| match line_of(&source, &v.subject).filter(|_| !v.subject.is_empty()) {
                Some(line) => format!("{p}:{line}: {v}"),
                None => format!("{p}: {v}"),
            })
            .collect();
        return Err(Outcome::Error { messages, code: EXIT_INPUT });
    }
    let system = compile(&model).map_err(|e| fail(EXIT_INPUT, format!("{p}: {e}")))?;
    Ok(Input::Model(model, system))
}

fn model_error(path: &str, e: ModelError) -> Outcome {
    match e {
        ModelError::Parse { line, column, message } => fail(EXIT_INPUT, format!("{path}:{line}:{column}: {message}")),
        other => fail(EXIT_INPUT, format!("{path}: {other}")),
    }
}

fn witnesses_for(system: &ResidualSystem, cfg: &RunConfig) -> Result<Vec<Witness>, Outcome> {
    if system.num_vars() == 0 {
        return Ok(vec![Witness { x: Vec::new(), satisfied: Vec::new(), seed: cfg.seed, attempts: 0 }]);
    }
    generate_witnesses(system, cfg.seed, cfg.witnesses, DEFAULT_ATTEMPTS).map_err(|e| fail(EXIT_SOLVER, e.to_string()))
}

fn witness_report(system: &ResidualSystem, cfg: &RunConfig) -> Result<(WcmReport, Vec<Witness>), Outcome> {
    let witnesses = witnesses_for(system, cfg)?;
    Ok((characterize_with(system, &witnesses, None, cfg.rank_tol), witnesses))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DmSection {
    saturation: &'static str,
    over: PartLabels,
    well: PartLabels,
    under: PartLabels,
}

#[derive(Serialize)]
struct PartLabels {
    equations: Vec<String>,
    variables: Vec<String>,
}

fn part_labels(g: &EquationGraph, part: &DmPart) -> PartLabels {
    PartLabels {
        equations: part.eqs.iter().map(|&e| g.eq_labels[e].clone()).collect(),
        variables: part.vars.iter().map(|&v| g.var_labels[v].clone()).collect(),
    }
}

#[derive(Serialize)]
struct StructuralSection {
    verdict: &'static str,
    counting: Option<CountingReport>,
    dm: DmSection,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CheckReport {
    verdict: &'static str,
    exit_code: u8,
    seed: u64,
    structural: Option<StructuralSection>,
    witness: Option<WcmReport>,
}

/// DM runs on the anchored system for geometric models, so rigid motions
/// do not show up as under-determined variables.
fn structural_section(input: &Input) -> (StructuralSection, u8) {
    let anchored = match input {
        Input::Model(model, system) if !model.has_fix() => add_anchors(system, model.dimension).ok(),
        _ => None,
    };
    let g = EquationGraph::from_system(anchored.as_ref().unwrap_or(input.system()));
    let dm = dm_decompose(&g);
    let dm_section = DmSection {
        saturation: saturation_name(dm.saturation),
        over: part_labels(&g, &dm.over),
        well: part_labels(&g, &dm.well),
        under: part_labels(&g, &dm.under),
    };
    match input {
        Input::Model(model, _) => {
            let counting = counting_state(&ConstraintGraph::from_model(model), &CountingMode::FixedD);
            let verdict = counting.verdict;
            let name = match verdict {
                StructuralVerdict::Well => "well",
                StructuralVerdict::Under => "under",
                StructuralVerdict::Over => "over",
            };
            (StructuralSection { verdict: name, counting: Some(counting), dm: dm_section }, structural_code(verdict))
        }
        Input::Linear(_) => {
            let name = saturation_name(dm.saturation);
            (StructuralSection { verdict: name, counting: None, dm: dm_section }, saturation_code(dm.saturation))
        }
    }
}

fn code_name(code: u8) -> &'static str {
    match code {
        0 => "well",
        EXIT_UNDER => "under",
        EXIT_OVER => "over",
        5 => "over-and-under",
        _ => "unstable",
    }
}

fn render_witness(out: &mut String, r: &WcmReport) {
    let _ = writeln!(
        out,
        "witness: {} (rows {}, columns {}, rank {}, dor {}, free motions {})",
        r.verdict.as_str(),
        r.rows,
        r.columns,
        r.rank,
        r.dor,
        r.free_motions
    );
    let seeds: Vec<String> = r.seeds.iter().map(|s| s.to_string()).collect();
    let ranks: Vec<String> = r.witness_ranks.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "  seeds {} ranks {}", seeds.join(","), ranks.join(","));
    for g in &r.dependent_groups {
        let _ = writeln!(out, "  dependent group: {}", g.join(", "));
    }
}

pub fn check(path: &Path, cfg: &RunConfig) -> Outcome {
    let input = match load(path) {
        Ok(i) => i,
        Err(o) => return o,
    };
    let structural = (cfg.mode != Mode::Witness).then(|| structural_section(&input));
    let witness = if cfg.mode == Mode::Structural {
        None
    } else {
        match witness_report(input.system(), cfg) {
            Ok((r, _)) => Some(r),
            Err(o) => return o,
        }
    };
    let code = match (&witness, &structural) {
        (Some(w), _) => verdict_code(w.verdict),
        (None, Some((_, c))) => *c,
        (None, None) => unreachable!("mode selects at least one analysis"),
    };
    let verdict = witness.as_ref().map(|w| w.verdict.as_str()).unwrap_or_else(|| code_name(code));

    let mut text = format!("verdict: {verdict}\n");
    if let Some(w) = &witness {
        render_witness(&mut text, w);
    }
    if let Some((s, _)) = &structural {
        match &s.counting {
            Some(c) => {
                let _ = writeln!(
                    text,
                    "structural: {} (dof {}, doc {}, threshold {}{})",
                    s.verdict,
                    c.dof,
                    c.doc,
                    c.threshold,
                    if c.advisory { ", advisory" } else { "" }
                );
                if let Some(v) = &c.violating {
                    let _ = writeln!(text, "  violating subsystem: {}", v.join(", "));
                }
            }
            None => {
                let _ = writeln!(text, "structural: {}", s.verdict);
            }
        }
        let _ = writeln!(text, "  dm: {}", s.dm.saturation);
    }
    let report =
        CheckReport { verdict, exit_code: code, seed: cfg.seed, structural: structural.map(|(s, _)| s), witness };
    Outcome::Report { json: serde_json::to_value(report).expect("serializes"), text, notes: Vec::new(), code }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DetectSection {
    method: &'static str,
    dependency_groups: Vec<Vec<String>>,
    well_parts: Vec<Vec<String>>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DetectReport {
    verdict: &'static str,
    exit_code: u8,
    seed: u64,
    free_motions: usize,
    greedy: DetectSection,
    oracle: Option<DetectSection>,
    oracle_skipped: Vec<String>,
}

fn group_labels(groups: &[DependencyGroup]) -> Vec<Vec<String>> {
    groups.iter().map(|g| g.labels.clone()).collect()
}

fn part_entities(parts: &[WellPart]) -> Vec<Vec<String>> {
    parts.iter().map(|p| p.entities.clone()).collect()
}

pub fn detect(path: &Path, cfg: &RunConfig) -> Outcome {
    let input = match load(path) {
        Ok(i) => i,
        Err(o) => return o,
    };
    let system = input.system();
    let (report, witnesses) = match witness_report(system, cfg) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let eval = |e: DetectionError| fail(EXIT_SOLVER, e.to_string());
    let witness = &report.witness;
    let greedy_groups = if system.num_residuals() == 0 {
        Vec::new()
    } else {
        match greedy_dependency_groups(system, witness, 0) {
            Ok(g) => g,
            Err(e) => return eval(e),
        }
    };
    let mut skipped = Vec::new();
    let oracle_groups = match oracle_min_dependent_sets(system, witness, ORACLE_ROW_CAP) {
        Ok(g) => Some(g),
        Err(e @ DetectionError::CapExceeded { .. }) => {
            skipped.push(e.to_string());
            None
        }
        Err(e) => return eval(e),
    };
    let (greedy_parts, oracle_part) = match &input {
        Input::Model(model, _) if !model.entities.is_empty() => {
            let greedy = match greedy_well_parts(model, system, &witnesses, 0) {
                Ok(p) => p,
                Err(e) => return eval(e),
            };
            let oracle = match oracle_max_well_part(model, system, &witnesses, ORACLE_ENTITY_CAP) {
                Ok(p) => Some(p.into_iter().collect::<Vec<_>>()),
                Err(e @ DetectionError::CapExceeded { .. }) => {
                    skipped.push(e.to_string());
                    None
                }
                Err(e) => return eval(e),
            };
            (greedy, oracle)
        }
        _ => (Vec::new(), Some(Vec::new())),
    };

    let greedy = DetectSection {
        method: "greedy",
        dependency_groups: group_labels(&greedy_groups),
        well_parts: part_entities(&greedy_parts),
    };
    let oracle = (oracle_groups.is_some() || oracle_part.is_some()).then(|| DetectSection {
        method: "oracle",
        dependency_groups: oracle_groups.as_deref().map(group_labels).unwrap_or_default(),
        well_parts: oracle_part.as_deref().map(part_entities).unwrap_or_default(),
    });

    let code = verdict_code(report.verdict);
    let mut text = format!("verdict: {}\n", report.verdict.as_str());
    if report.verdict == Verdict::Well && greedy.dependency_groups.is_empty() {
        text.push_str("no ill-constrained parts\n");
    }
    if report.free_motions > 0 {
        let _ = writeln!(text, "free motions: {}", report.free_motions);
    }
    for section in std::iter::once(&greedy).chain(oracle.as_ref()) {
        for g in &section.dependency_groups {
            let _ = writeln!(text, "{} dependency group: {}", section.method, g.join(", "));
        }
        for p in &section.well_parts {
            let _ = writeln!(text, "{} well part: {}", section.method, p.join(", "));
        }
    }
    for s in &skipped {
        let _ = writeln!(text, "oracle skipped: {s}");
    }
    let json = DetectReport {
        verdict: report.verdict.as_str(),
        exit_code: code,
        seed: cfg.seed,
        free_motions: report.free_motions,
        greedy,
        oracle,
        oracle_skipped: skipped,
    };
    Outcome::Report { json: serde_json::to_value(json).expect("serializes"), text, notes: Vec::new(), code }
}

fn require_model(input: Input, command: &str) -> Result<(Model, ResidualSystem), Outcome> {
    match input {
        Input::Model(m, s) => Ok((m, s)),
        Input::Linear(_) => Err(fail(EXIT_INPUT, format!("{command} needs a geometric model, not a linear system"))),
    }
}

fn render_node(out: &mut String, node: &ClusterNode, depth: usize) {
    let pad = "  ".repeat(depth);
    let _ = match node {
        ClusterNode::Leaf { entities, constraints } => {
            writeln!(out, "{pad}leaf [{}] ({})", entities.join(", "), constraints.join(", "))
        }
        ClusterNode::Merge { rule, shared, entities, .. } => {
            writeln!(out, "{pad}merge {rule:?} on [{}] -> [{}]", shared.join(", "), entities.join(", "))
        }
        ClusterNode::Split { pair, bond, donor, .. } => {
            writeln!(out, "{pad}split at {}-{} (bond {}, donor {donor})", pair[0], pair[1], bond.id)
        }
        ClusterNode::Irreducible { entities, reason, .. } => {
            writeln!(out, "{pad}irreducible [{}]: {reason}", entities.join(", "))
        }
    };
    for c in node.children() {
        render_node(out, c, depth + 1);
    }
}

fn build_tree(model: &Model, cfg: &RunConfig) -> Result<ClusterTree, Outcome> {
    match cfg.strategy {
        None | Some(StrategyArg::BottomUp) | Some(StrategyArg::Decomposed) => {
            bottom_up(model, cfg.seed).map_err(|e| fail(EXIT_SOLVER, e.to_string()))
        }
        Some(StrategyArg::TopDown) => Ok(top_down(model)),
        Some(StrategyArg::Direct) => Err(fail(EXIT_INPUT, "decompose takes --strategy bottom-up or top-down")),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DecomposeReport {
    verdict: &'static str,
    exit_code: u8,
    tree: ClusterTree,
}

pub fn decompose(path: &Path, cfg: &RunConfig) -> Outcome {
    let (model, system) = match load(path).and_then(|i| require_model(i, "decompose")) {
        Ok(m) => m,
        Err(o) => return o,
    };
    let report = match witness_report(&system, cfg) {
        Ok((r, _)) => r,
        Err(o) => return o,
    };
    let tree = match build_tree(&model, cfg) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let code = verdict_code(report.verdict);
    let mut notes = Vec::new();
    if report.verdict != Verdict::Well {
        notes.push(format!(
            "model is {}; run `gcs detect` to locate the ill-constrained parts",
            report.verdict.as_str()
        ));
    }
    let mut text = format!("verdict: {}\n", report.verdict.as_str());
    for root in &tree.roots {
        render_node(&mut text, root, 0);
    }
    if !tree.leftover_constraints.is_empty() {
        let _ = writeln!(text, "leftover constraints: {}", tree.leftover_constraints.join(", "));
    }
    if !tree.uncovered_entities.is_empty() {
        let _ = writeln!(text, "uncovered entities: {}", tree.uncovered_entities.join(", "));
    }
    let json = DecomposeReport { verdict: report.verdict.as_str(), exit_code: code, tree };
    Outcome::Report { json: serde_json::to_value(json).expect("serializes"), text, notes, code }
}

#[derive(Serialize)]
struct EntityValue {
    id: String,
    params: Vec<f64>,
}

#[derive(Serialize)]
struct ResidualValue {
    label: String,
    value: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SolveReport {
    status: SolveStatus,
    strategy: &'static str,
    exit_code: u8,
    residual_norm: f64,
    iterations: Option<usize>,
    diagnostic: Option<String>,
    entities: Vec<EntityValue>,
    /// Residuals above tolerance, when the solve did not converge.
    certificate: Vec<ResidualValue>,
    placements: Vec<Placement>,
    bonds: Vec<(String, f64)>,
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::Inconsistent => EXIT_OVER,
        SolveStatus::Diverged | SolveStatus::MaxIterations => EXIT_SOLVER,
    }
}

fn entity_values(system: &ResidualSystem, x: &[f64]) -> Vec<EntityValue> {
    system.entities.iter().map(|s| EntityValue { id: s.id.clone(), params: x[s.range()].to_vec() }).collect()
}

fn certificate(system: &ResidualSystem, x: &[f64], tol: f64) -> Vec<ResidualValue> {
    let Ok(r) = eval_residuals(system, x) else { return Vec::new() };
    system
        .residuals
        .iter()
        .zip(r)
        .filter(|(_, v)| v.abs() > tol)
        .map(|(res, value)| ResidualValue { label: res.label.clone(), value })
        .collect()
}

pub fn solve(path: &Path, cfg: &RunConfig) -> Outcome {
    let (model, system) = match load(path).and_then(|i| require_model(i, "solve")) {
        Ok(m) => m,
        Err(o) => return o,
    };
    let report = match witness_report(&system, cfg) {
        Ok((r, _)) => r,
        Err(o) => return o,
    };
    if report.verdict != Verdict::Well {
        return fail(
            verdict_code(report.verdict),
            format!("model is {}; run `gcs check` or `gcs detect` first", report.verdict.as_str()),
        );
    }
    let model = initial_guess(&model, cfg.seed);
    let opts = cfg.solve_options();
    let decomposed = !matches!(cfg.strategy, None | Some(StrategyArg::Direct));
    let solved = if decomposed {
        let tree = match build_tree(&model, cfg) {
            Ok(t) => t,
            Err(o) => return o,
        };
        match solve_tree(&tree, &model, &opts) {
            Ok(plan) => SolveReport {
                status: SolveStatus::Converged,
                strategy: "decomposed",
                exit_code: 0,
                residual_norm: plan.residual_norm,
                iterations: None,
                diagnostic: None,
                entities: entity_values(&system, &plan.x),
                certificate: Vec::new(),
                placements: plan.placements,
                bonds: plan.bonds,
            },
            Err(DecompositionError::ClusterSolve { cluster, message, status: Some(status) }) => {
                return fail(status_code(status), format!("cluster [{}]: {message}", cluster.join(", ")));
            }
            Err(e) => return fail(EXIT_SOLVER, e.to_string()),
        }
    } else {
        let direct = match solve_anchored(&model, &opts) {
            Ok(d) => d,
            Err(e) => return fail(EXIT_SOLVER, e.to_string()),
        };
        let r = direct.result;
        SolveReport {
            status: r.status,
            strategy: "direct",
            exit_code: status_code(r.status),
            residual_norm: r.residual_norm,
            iterations: Some(r.iterations),
            certificate: if r.converged() { Vec::new() } else { certificate(&system, &r.x, cfg.tolerance) },
            diagnostic: r.diagnostic,
            entities: entity_values(&system, &r.x),
            placements: Vec::new(),
            bonds: Vec::new(),
        }
    };

    let status = match solved.status {
        SolveStatus::Converged => "converged",
        SolveStatus::Diverged => "diverged",
        SolveStatus::Inconsistent => "inconsistent",
        SolveStatus::MaxIterations => "max-iterations",
    };
    let mut text = format!("status: {status} ({}, residual {:.3e}", solved.strategy, solved.residual_norm);
    if let Some(it) = solved.iterations {
        let _ = write!(text, ", {it} iterations");
    }
    text.push_str(")\n");
    if let Some(d) = &solved.diagnostic {
        let _ = writeln!(text, "diagnostic: {d}");
    }
    for c in &solved.certificate {
        let _ = writeln!(text, "  residual {} = {:.6e}", c.label, c.value);
    }
    if solved.status == SolveStatus::Converged {
        for e in &solved.entities {
            let params: Vec<String> = e.params.iter().map(|v| format!("{v:.12}")).collect();
            let _ = writeln!(text, "{} = [{}]", e.id, params.join(", "));
        }
    }
    let code = solved.exit_code;
    Outcome::Report { json: serde_json::to_value(solved).expect("serializes"), text, notes: Vec::new(), code }
}
