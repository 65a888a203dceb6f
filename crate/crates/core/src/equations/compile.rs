use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use super::expr::{c, cos, dot, sin, sq, var, DomainError, Expr};
use crate::model::{validate, Constraint, ConstraintKind, EntityKind, Model, PlaneScheme};

/// How a 2D line-line angle is turned into an equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleForm {
    /// `(φ1 − φ2)² − (π − α)²`
    #[default]
    Squared,
    /// `φ1 − φ2 − (π − α)`
    Linear,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompileOptions {
    pub angle_form: AngleForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    /// `<entity id>.<component>`, e.g. `P1.x`.
    pub id: String,
    /// Index of the owning entity in the model.
    pub entity: usize,
    pub component: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualRole {
    Constraint,
    Normalization,
    Anchor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub expr: Expr,
    /// Constraint id, entity id (normalization) or `anchor`.
    pub source: String,
    /// Unique, human-readable row label.
    pub label: String,
    pub singular: bool,
    pub role: ResidualRole,
    /// Kind of the originating constraint, if any.
    pub kind: Option<ConstraintKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntitySlot {
    pub id: String,
    pub kind: EntityKind,
    /// First variable index of the entity.
    pub offset: usize,
}

impl EntitySlot {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.kind.raw_len()
    }
}

/// Compiled equation system. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSystem {
    pub dimension: u8,
    pub entities: Vec<EntitySlot>,
    pub variables: Vec<Variable>,
    pub residuals: Vec<Residual>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("model is invalid: {0}")]
    Invalid(String),
    #[error("constraint {id}: unsupported kind/operands combination")]
    Unsupported { id: String },
    #[error("cannot anchor: need {needed} point entities, found {found}")]
    InsufficientAnchors { needed: usize, found: usize },
}

#[derive(Debug, Error, PartialEq)]
#[error("residual {index}: {kind}")]
pub struct EvalError {
    pub index: usize,
    pub kind: DomainError,
}

const COMPONENT_NAMES: [&[&str]; 4] = [&["x", "y"], &["phi", "rho"], &["cx", "cy", "r"], &["x", "y", "z"]];
const LINE3_NAMES: &[&str] = &["px", "py", "pz", "dx", "dy", "dz"];
const HESSIAN_NAMES: &[&str] = &["a", "b", "c", "d"];
const POINT_NORMAL_NAMES: &[&str] = &["px", "py", "pz", "nx", "ny", "nz"];

fn component_names(kind: EntityKind) -> &'static [&'static str] {
    match kind {
        EntityKind::Point2 => COMPONENT_NAMES[0],
        EntityKind::Line2 => COMPONENT_NAMES[1],
        EntityKind::Circle2 => COMPONENT_NAMES[2],
        EntityKind::Point3 => COMPONENT_NAMES[3],
        EntityKind::Line3 => LINE3_NAMES,
        EntityKind::Plane3(PlaneScheme::Hessian) => HESSIAN_NAMES,
        EntityKind::Plane3(PlaneScheme::PointNormal) => POINT_NORMAL_NAMES,
    }
}

type V3 = [Expr; 3];

fn vec3(offset: usize) -> V3 {
    [var(offset), var(offset + 1), var(offset + 2)]
}

fn sub3(a: &V3, b: &V3) -> V3 {
    [a[0].clone() - b[0].clone(), a[1].clone() - b[1].clone(), a[2].clone() - b[2].clone()]
}

fn dot3(a: &V3, b: &V3) -> Expr {
    dot(a.to_vec(), b.to_vec())
}

fn cross_component(a: &V3, b: &V3, k: usize) -> Expr {
    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
    a[i].clone() * b[j].clone() - a[j].clone() * b[i].clone()
}

/// Two equations stating `a × b = 0`: the cross-product components that
/// exclude the dominant axis of `pivot`.
fn cross_pair(a: &V3, b: &V3, pivot: &V3) -> [Expr; 2] {
    let row = |slot: usize| Expr::Dominant {
        pivot: pivot.to_vec(),
        branches: (0..3).map(|axis| cross_component(a, b, (axis + 1 + slot) % 3)).collect(),
    };
    [row(0), row(1)]
}

fn norm_sq(a: &V3) -> Expr {
    dot3(a, a)
}

/// Plane accessors shared by both schemes.
struct PlaneView {
    scheme: PlaneScheme,
    offset: usize,
}

impl PlaneView {
    fn normal(&self) -> V3 {
        match self.scheme {
            PlaneScheme::Hessian => vec3(self.offset),
            PlaneScheme::PointNormal => vec3(self.offset + 3),
        }
    }

    /// Signed distance of `q` to the plane (exact when the normal is unit).
    fn signed_distance(&self, q: &V3) -> Expr {
        match self.scheme {
            PlaneScheme::Hessian => dot3(&self.normal(), q) + var(self.offset + 3),
            PlaneScheme::PointNormal => dot3(&self.normal(), &sub3(q, &vec3(self.offset))),
        }
    }

    /// A point on the plane: `−d·n` for the Hessian form, `p` otherwise.
    fn foot(&self) -> V3 {
        match self.scheme {
            PlaneScheme::Hessian => {
                let n = self.normal();
                let d = var(self.offset + 3);
                [-(d.clone() * n[0].clone()), -(d.clone() * n[1].clone()), -(d * n[2].clone())]
            }
            PlaneScheme::PointNormal => vec3(self.offset),
        }
    }
}

pub fn compile(model: &Model) -> Result<ResidualSystem, CompileError> {
    compile_with(model, &CompileOptions::default())
}

/// Compiles constraints (model order, one residual per DOC unit) followed by
/// the normalization residuals of line3/plane3 entities (entity order).
pub fn compile_with(model: &Model, options: &CompileOptions) -> Result<ResidualSystem, CompileError> {
    let violations = validate(model);
    if !violations.is_empty() {
        let msg = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        return Err(CompileError::Invalid(msg));
    }

    let mut entities = Vec::with_capacity(model.entities.len());
    let mut variables = Vec::new();
    for (ei, e) in model.entities.iter().enumerate() {
        entities.push(EntitySlot { id: e.id.clone(), kind: e.kind, offset: variables.len() });
        for (k, name) in component_names(e.kind).iter().enumerate() {
            variables.push(Variable {
                id: format!("{}.{}", e.id, name),
                entity: ei,
                component: k,
                value: e.params.as_ref().map_or(0.0, |p| p[k]),
            });
        }
    }

    let mut residuals = Vec::new();
    for con in &model.constraints {
        let rows = constraint_rows(model, &entities, con, options)?;
        let multi = rows.len() > 1;
        for (k, expr) in rows.into_iter().enumerate() {
            residuals.push(Residual {
                expr,
                source: con.id.clone(),
                label: if multi { format!("{}#{}", con.id, k) } else { con.id.clone() },
                singular: con.kind.is_singular(),
                role: ResidualRole::Constraint,
                kind: Some(con.kind),
            });
        }
    }

    for slot in &entities {
        let dir = match slot.kind {
            EntityKind::Line3 => Some(vec3(slot.offset + 3)),
            EntityKind::Plane3(scheme) => Some(PlaneView { scheme, offset: slot.offset }.normal()),
            _ => None,
        };
        if let Some(d) = dir {
            residuals.push(Residual {
                expr: norm_sq(&d) - c(1.0),
                source: slot.id.clone(),
                label: format!("norm:{}", slot.id),
                singular: true,
                role: ResidualRole::Normalization,
                kind: None,
            });
        }
    }

    Ok(ResidualSystem { dimension: model.dimension, entities, variables, residuals })
}

fn constraint_rows(
    model: &Model,
    slots: &[EntitySlot],
    con: &Constraint,
    options: &CompileOptions,
) -> Result<Vec<Expr>, CompileError> {
    use EntityKind::*;
    let unsupported = || CompileError::Unsupported { id: con.id.clone() };
    let ops: Vec<&EntitySlot> = model.operands(con).ok_or_else(unsupported)?.into_iter().map(|i| &slots[i]).collect();
    let kinds: Vec<EntityKind> = ops.iter().map(|s| s.kind).collect();
    let o: Vec<usize> = ops.iter().map(|s| s.offset).collect();
    let value = con.value.unwrap_or(0.0);

    let rows = match (con.kind, kinds.as_slice()) {
        (ConstraintKind::DistancePp, [Point2, Point2] | [Point3, Point3]) => {
            let n = kinds[0].raw_len();
            let mut e = sq(var(o[1]) - var(o[0]));
            for k in 1..n {
                e = e + sq(var(o[1] + k) - var(o[0] + k));
            }
            vec![e - c(value * value)]
        }
        (ConstraintKind::DistancePl, [Point2, Line2]) => {
            vec![sq(hesse_line(o[0], o[1])) - c(value * value)]
        }
        (ConstraintKind::DistancePl, [Point3, Line3]) => {
            let rel = sub3(&vec3(o[0]), &vec3(o[1]));
            let d = vec3(o[1] + 3);
            let e = (0..3).map(|k| sq(cross_component(&rel, &d, k))).reduce(|a, b| a + b).unwrap();
            vec![e - c(value * value)]
        }
        (ConstraintKind::DistancePplane, [Point3, Plane3(s)]) => {
            let plane = PlaneView { scheme: *s, offset: o[1] };
            vec![sq(plane.signed_distance(&vec3(o[0]))) - c(value * value)]
        }
        (ConstraintKind::DistancePlaneplane, [Plane3(s1), Plane3(s2)]) => {
            let p1 = PlaneView { scheme: *s1, offset: o[0] };
            let p2 = PlaneView { scheme: *s2, offset: o[1] };
            vec![sq(p2.signed_distance(&p1.foot())) - c(value * value)]
        }
        (ConstraintKind::AngleLl, [Line2, Line2]) => {
            let diff = var(o[0]) - var(o[1]);
            let target = PI - value;
            match options.angle_form {
                AngleForm::Squared => vec![sq(diff) - c(target * target)],
                AngleForm::Linear => vec![diff - c(target)],
            }
        }
        (ConstraintKind::AngleLl, [Line3, Line3]) => {
            vec![dot3(&vec3(o[0] + 3), &vec3(o[1] + 3)) - c(value.cos())]
        }
        (ConstraintKind::AnglePlaneplane, [Plane3(s1), Plane3(s2)]) => {
            let n1 = PlaneView { scheme: *s1, offset: o[0] }.normal();
            let n2 = PlaneView { scheme: *s2, offset: o[1] }.normal();
            vec![dot3(&n1, &n2) - c(value.cos())]
        }
        (ConstraintKind::PointOnLine, [Point2, Line2]) => vec![hesse_line(o[0], o[1])],
        (ConstraintKind::PointOnLine, [Point3, Line3]) => {
            let rel = sub3(&vec3(o[0]), &vec3(o[1]));
            let d = vec3(o[1] + 3);
            cross_pair(&rel, &d, &d).to_vec()
        }
        (ConstraintKind::LinesIntersect, [Line3, Line3]) => {
            let rel = sub3(&vec3(o[1]), &vec3(o[0]));
            let d = vec3(o[0] + 3);
            cross_pair(&rel, &d, &d).to_vec()
        }
        (ConstraintKind::PointOnPlane, [Point3, Plane3(s)]) => {
            vec![PlaneView { scheme: *s, offset: o[1] }.signed_distance(&vec3(o[0]))]
        }
        (ConstraintKind::Parallel, [Line2, Line2]) => vec![sin(var(o[0]) - var(o[1]))],
        (ConstraintKind::Perpendicular, [Line2, Line2]) => vec![cos(var(o[0]) - var(o[1]))],
        (ConstraintKind::Parallel | ConstraintKind::Perpendicular, [a, b]) => {
            let dir = |k: EntityKind, off: usize| match k {
                Line3 => Some(vec3(off + 3)),
                Plane3(s) => Some(PlaneView { scheme: s, offset: off }.normal()),
                _ => None,
            };
            let (Some(u), Some(w)) = (dir(*a, o[0]), dir(*b, o[1])) else {
                return Err(unsupported());
            };
            if con.kind == ConstraintKind::Parallel {
                cross_pair(&u, &w, &u).to_vec()
            } else {
                vec![dot3(&u, &w)]
            }
        }
        (ConstraintKind::Coincident, [Point2, Point2] | [Point3, Point3]) => {
            (0..kinds[0].raw_len()).map(|k| var(o[0] + k) - var(o[1] + k)).collect()
        }
        (ConstraintKind::Fix, [Point2] | [Point3]) => {
            let target =
                model.entities[model.entity_index(&con.entities[0]).unwrap()].params.clone().ok_or_else(unsupported)?;
            target.iter().enumerate().map(|(k, t)| var(o[0] + k) - c(*t)).collect()
        }
        _ => return Err(unsupported()),
    };
    Ok(rows)
}

/// `x·cos φ + y·sin φ − ρ` for a point at `p` and a 2D line at `l`.
fn hesse_line(p: usize, l: usize) -> Expr {
    var(p) * cos(var(l)) + var(p + 1) * sin(var(l)) - var(l + 1)
}

/// Appends residuals fixing the global frame: in 2D `x1 = 0, y1 = 0,
/// y2 − y1 = 0`; in 3D `P1 = 0`, `P1P2` along the x-axis and `P3` in the
/// xy-plane. Points are taken in entity order.
pub fn add_anchors(system: &ResidualSystem, dimension: u8) -> Result<ResidualSystem, CompileError> {
    let points: Vec<&EntitySlot> = system.entities.iter().filter(|s| s.kind.is_point()).collect();
    let needed = if dimension == 2 { 2 } else { 3 };
    if points.len() < needed {
        return Err(CompileError::InsufficientAnchors { needed, found: points.len() });
    }
    let p = |i: usize, k: usize| var(points[i].offset + k);
    let rows: Vec<(Expr, String)> = if dimension == 2 {
        vec![
            (p(0, 0), format!("{}.x", points[0].id)),
            (p(0, 1), format!("{}.y", points[0].id)),
            (p(1, 1) - p(0, 1), format!("{}.y-{}.y", points[1].id, points[0].id)),
        ]
    } else {
        vec![
            (p(0, 0), format!("{}.x", points[0].id)),
            (p(0, 1), format!("{}.y", points[0].id)),
            (p(0, 2), format!("{}.z", points[0].id)),
            (p(1, 1) - p(0, 1), format!("{}.y-{}.y", points[1].id, points[0].id)),
            (p(1, 2) - p(0, 2), format!("{}.z-{}.z", points[1].id, points[0].id)),
            (p(2, 2) - p(0, 2), format!("{}.z-{}.z", points[2].id, points[0].id)),
        ]
    };
    let mut out = system.clone();
    for (expr, label) in rows {
        out.residuals.push(Residual {
            expr,
            source: "anchor".into(),
            label: format!("anchor:{label}"),
            singular: false,
            role: ResidualRole::Anchor,
            kind: None,
        });
    }
    Ok(out)
}

pub fn eval_residuals(system: &ResidualSystem, x: &[f64]) -> Result<Vec<f64>, EvalError> {
    assert_eq!(x.len(), system.variables.len(), "assignment length");
    system
        .residuals
        .iter()
        .enumerate()
        .map(|(index, r)| r.expr.eval(x).map_err(|kind| EvalError { index, kind }))
        .collect()
}

pub fn eval_jacobian(system: &ResidualSystem, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
    assert_eq!(x.len(), system.variables.len(), "assignment length");
    let (m, n) = (system.residuals.len(), system.variables.len());
    let mut j = DMatrix::zeros(m, n);
    let mut grad = vec![0.0; n];
    for (index, r) in system.residuals.iter().enumerate() {
        grad.iter_mut().for_each(|g| *g = 0.0);
        r.expr.accumulate(x, 1.0, &mut grad).map_err(|kind| EvalError { index, kind })?;
        for (col, g) in grad.iter().enumerate() {
            j[(index, col)] = *g;
        }
    }
    Ok(j)
}

impl ResidualSystem {
    /// Builds a system directly from parts (e.g. plain linear equations).
    pub fn from_parts(
        dimension: u8,
        entities: Vec<EntitySlot>,
        variables: Vec<Variable>,
        residuals: Vec<Residual>,
    ) -> Self {
        Self { dimension, entities, variables, residuals }
    }

    /// Linear system `A·x = b` with one anonymous variable block.
    pub fn linear(names: &[&str], labels: &[&str], coefficients: &[Vec<f64>], rhs: &[f64]) -> Self {
        let variables = names
            .iter()
            .enumerate()
            .map(|(k, n)| Variable { id: n.to_string(), entity: 0, component: k, value: 0.0 })
            .collect();
        let residuals = coefficients
            .iter()
            .zip(rhs)
            .zip(labels)
            .map(|((row, b), label)| {
                let mut e = c(-b);
                for (k, a) in row.iter().enumerate() {
                    if *a != 0.0 {
                        e = e + c(*a) * var(k);
                    }
                }
                Residual {
                    expr: e,
                    source: label.to_string(),
                    label: label.to_string(),
                    singular: false,
                    role: ResidualRole::Constraint,
                    kind: None,
                }
            })
            .collect();
        Self { dimension: 0, entities: Vec::new(), variables, residuals }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_residuals(&self) -> usize {
        self.residuals.len()
    }

    /// Current variable values (entity params, zero where absent).
    pub fn values(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.value).collect()
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.id.clone()).collect()
    }

    /// Same variables, only the selected residual rows.
    pub fn select(&self, rows: &[usize]) -> ResidualSystem {
        ResidualSystem {
            dimension: self.dimension,
            entities: self.entities.clone(),
            variables: self.variables.clone(),
            residuals: rows.iter().map(|&i| self.residuals[i].clone()).collect(),
        }
    }

    pub fn select_where(&self, keep: impl Fn(&Residual) -> bool) -> ResidualSystem {
        let rows: Vec<usize> = (0..self.residuals.len()).filter(|&i| keep(&self.residuals[i])).collect();
        self.select(&rows)
    }

    /// Residual indices of a given role.
    pub fn rows_with_role(&self, role: ResidualRole) -> Vec<usize> {
        (0..self.residuals.len()).filter(|&i| self.residuals[i].role == role).collect()
    }

    /// Deterministic textual listing, one residual per line.
    pub fn dump(&self) -> String {
        let names = self.variable_names();
        let mut s = String::new();
        for (i, r) in self.residuals.iter().enumerate() {
            let mut tags = vec![r.label.clone()];
            if r.singular {
                tags.push("singular".into());
            }
            if r.role == ResidualRole::Anchor {
                tags.push("anchor".into());
            }
            let _ = writeln!(s, "r{} [{}] {} = 0", i, tags.join(", "), r.expr.render(&names));
        }
        s
    }
}
