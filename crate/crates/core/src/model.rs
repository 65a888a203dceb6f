//! Declarative geometric constraint systems.
//!
//! A [`Model`] declares geometric entities (points, lines, circles, planes) and
//! the constraints between them. Nothing here is solved or evaluated; the
//! types only carry the data plus the DOF/DOC bookkeeping that the graph and
//! Jacobian analyses build on.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Residual magnitude under which an equation counts as satisfied.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Parameterization scheme of a 3D plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneScheme {
    /// `(a, b, c, d)` with `a² + b² + c² = 1`; plane `a·x + b·y + c·z + d = 0`.
    Hessian,
    /// `(p, n)`: a point on the plane and a unit normal.
    PointNormal,
}

/// Representation selector as it appears in the JSON `representation` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    Hessian,
    PointNormal,
    PointDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityKind {
    /// `(x, y)`
    Point2,
    /// Hesse normal form `(φ, ρ)`: `x·cos φ + y·sin φ − ρ = 0`.
    Line2,
    /// `(cx, cy, r)`
    Circle2,
    /// `(x, y, z)`
    Point3,
    /// Point-direction `(p, d)` with `|d| = 1`.
    Line3,
    Plane3(PlaneScheme),
}

impl EntityKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EntityKind::Point2 => "point2",
            EntityKind::Line2 => "line2",
            EntityKind::Circle2 => "circle2",
            EntityKind::Point3 => "point3",
            EntityKind::Line3 => "line3",
            EntityKind::Plane3(_) => "plane3",
        }
    }

    pub fn dimension(&self) -> u8 {
        match self {
            EntityKind::Point2 | EntityKind::Line2 | EntityKind::Circle2 => 2,
            _ => 3,
        }
    }

    /// Number of stored coordinates (Jacobian columns contributed).
    pub fn raw_len(&self) -> usize {
        match self {
            EntityKind::Point2 | EntityKind::Line2 => 2,
            EntityKind::Circle2 | EntityKind::Point3 => 3,
            EntityKind::Line3 => 6,
            EntityKind::Plane3(PlaneScheme::Hessian) => 4,
            EntityKind::Plane3(PlaneScheme::PointNormal) => 6,
        }
    }

    /// Normalization equations emitted alongside the entity.
    pub fn normalizations(&self) -> usize {
        match self {
            EntityKind::Line3 | EntityKind::Plane3(_) => 1,
            _ => 0,
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, EntityKind::Point2 | EntityKind::Point3)
    }

    pub fn representation(&self) -> Option<Representation> {
        match self {
            EntityKind::Line3 => Some(Representation::PointDirection),
            EntityKind::Plane3(PlaneScheme::Hessian) => Some(Representation::Hessian),
            EntityKind::Plane3(PlaneScheme::PointNormal) => Some(Representation::PointNormal),
            _ => None,
        }
    }

    fn from_parts(tag: &str, repr: Option<Representation>) -> Result<Self, String> {
        let kind = match (tag, repr) {
            ("point2", None) => EntityKind::Point2,
            ("line2", None) => EntityKind::Line2,
            ("circle2", None) => EntityKind::Circle2,
            ("point3", None) => EntityKind::Point3,
            ("line3", None | Some(Representation::PointDirection)) => EntityKind::Line3,
            ("plane3", None | Some(Representation::Hessian)) => EntityKind::Plane3(PlaneScheme::Hessian),
            ("plane3", Some(Representation::PointNormal)) => EntityKind::Plane3(PlaneScheme::PointNormal),
            ("point2" | "line2" | "circle2" | "point3" | "line3" | "plane3", Some(r)) => {
                return Err(format!("representation {r:?} is not valid for {tag}"))
            }
            _ => return Err(format!("unknown entity kind `{tag}`")),
        };
        Ok(kind)
    }
}

impl Serialize for EntityKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Effective degrees of freedom: raw parameters minus normalization equations.
pub fn dof_of(kind: EntityKind) -> usize {
    kind.raw_len() - kind.normalizations()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
    /// Initial guess (or fixed location for `fix`); length is checked by [`validate`].
    pub params: Option<Vec<f64>>,
}

impl Entity {
    pub fn new(id: impl Into<String>, kind: EntityKind) -> Self {
        Self { id: id.into(), kind, params: None }
    }

    pub fn with_params(id: impl Into<String>, kind: EntityKind, params: Vec<f64>) -> Self {
        Self { id: id.into(), kind, params: Some(params) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    DistancePp,
    DistancePl,
    DistancePplane,
    AngleLl,
    AnglePlaneplane,
    PointOnLine,
    PointOnPlane,
    Parallel,
    Perpendicular,
    Coincident,
    Fix,
    LinesIntersect,
    DistancePlaneplane,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 13] = [
        ConstraintKind::DistancePp,
        ConstraintKind::DistancePl,
        ConstraintKind::DistancePplane,
        ConstraintKind::AngleLl,
        ConstraintKind::AnglePlaneplane,
        ConstraintKind::PointOnLine,
        ConstraintKind::PointOnPlane,
        ConstraintKind::Parallel,
        ConstraintKind::Perpendicular,
        ConstraintKind::Coincident,
        ConstraintKind::Fix,
        ConstraintKind::LinesIntersect,
        ConstraintKind::DistancePlaneplane,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            ConstraintKind::DistancePp => "distance-pp",
            ConstraintKind::DistancePl => "distance-pl",
            ConstraintKind::DistancePplane => "distance-pplane",
            ConstraintKind::AngleLl => "angle-ll",
            ConstraintKind::AnglePlaneplane => "angle-planeplane",
            ConstraintKind::PointOnLine => "point-on-line",
            ConstraintKind::PointOnPlane => "point-on-plane",
            ConstraintKind::Parallel => "parallel",
            ConstraintKind::Perpendicular => "perpendicular",
            ConstraintKind::Coincident => "coincident",
            ConstraintKind::Fix => "fix",
            ConstraintKind::LinesIntersect => "lines-intersect",
            ConstraintKind::DistancePlaneplane => "distance-planeplane",
        }
    }

    /// Incidence-type constraints whose solution set has measure zero; a
    /// witness configuration must satisfy them.
    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            ConstraintKind::PointOnLine
                | ConstraintKind::PointOnPlane
                | ConstraintKind::Parallel
                | ConstraintKind::Perpendicular
                | ConstraintKind::Coincident
                | ConstraintKind::LinesIntersect
        )
    }

    pub fn is_distance(&self) -> bool {
        matches!(
            self,
            ConstraintKind::DistancePp
                | ConstraintKind::DistancePl
                | ConstraintKind::DistancePplane
                | ConstraintKind::DistancePlaneplane
        )
    }

    pub fn is_angle(&self) -> bool {
        matches!(self, ConstraintKind::AngleLl | ConstraintKind::AnglePlaneplane)
    }

    pub fn takes_value(&self) -> bool {
        self.is_distance() || self.is_angle()
    }

    /// Checks the operand kinds and returns the number of scalar equations.
    pub fn signature(&self, operands: &[EntityKind]) -> Option<usize> {
        use EntityKind::*;
        let doc = match (self, operands) {
            (ConstraintKind::DistancePp, [Point2, Point2]) => 1,
            (ConstraintKind::DistancePp, [Point3, Point3]) => 1,
            (ConstraintKind::DistancePl, [Point2, Line2]) => 1,
            (ConstraintKind::DistancePl, [Point3, Line3]) => 1,
            (ConstraintKind::DistancePplane, [Point3, Plane3(_)]) => 1,
            (ConstraintKind::AngleLl, [Line2, Line2]) => 1,
            (ConstraintKind::AngleLl, [Line3, Line3]) => 1,
            (ConstraintKind::AnglePlaneplane, [Plane3(_), Plane3(_)]) => 1,
            (ConstraintKind::PointOnLine, [Point2, Line2]) => 1,
            (ConstraintKind::PointOnLine, [Point3, Line3]) => 2,
            (ConstraintKind::PointOnPlane, [Point3, Plane3(_)]) => 1,
            (ConstraintKind::Parallel, [Line2, Line2]) => 1,
            (ConstraintKind::Parallel, [Line3, Line3]) => 2,
            (ConstraintKind::Parallel, [Plane3(_), Plane3(_)]) => 2,
            (ConstraintKind::Perpendicular, [Line2, Line2]) => 1,
            (ConstraintKind::Perpendicular, [Line3, Line3]) => 1,
            (ConstraintKind::Perpendicular, [Plane3(_), Plane3(_)]) => 1,
            (ConstraintKind::Coincident, [Point2, Point2]) => 2,
            (ConstraintKind::Coincident, [Point3, Point3]) => 3,
            (ConstraintKind::Fix, [Point2]) => 2,
            (ConstraintKind::Fix, [Point3]) => 3,
            (ConstraintKind::LinesIntersect, [Line3, Line3]) => 2,
            (ConstraintKind::DistancePlaneplane, [Plane3(_), Plane3(_)]) => 1,
            _ => return None,
        };
        Some(doc)
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("constraint kind {kind} is not defined in dimension {dimension}")]
pub struct DocError {
    pub kind: ConstraintKind,
    pub dimension: u8,
}

/// Degree of constraint of a kind in the given ambient dimension.
pub fn doc_of(kind: ConstraintKind, dimension: u8) -> Result<usize, DocError> {
    let err = DocError { kind, dimension };
    let doc = match (kind, dimension) {
        (_, d) if d != 2 && d != 3 => return Err(err),
        (ConstraintKind::DistancePp | ConstraintKind::DistancePl, _) => 1,
        (ConstraintKind::AngleLl | ConstraintKind::Perpendicular, _) => 1,
        (ConstraintKind::PointOnLine | ConstraintKind::Parallel, 2) => 1,
        (ConstraintKind::PointOnLine | ConstraintKind::Parallel, _) => 2,
        (ConstraintKind::Coincident | ConstraintKind::Fix, d) => d as usize,
        (
            ConstraintKind::DistancePplane
            | ConstraintKind::AnglePlaneplane
            | ConstraintKind::PointOnPlane
            | ConstraintKind::DistancePlaneplane,
            3,
        ) => 1,
        (ConstraintKind::LinesIntersect, 3) => 2,
        _ => return Err(err),
    };
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub id: String,
    pub kind: ConstraintKind,
    pub entities: Vec<String>,
    /// Distance in model units or angle in radians; `None` for non-parametric kinds.
    pub value: Option<f64>,
}

impl Constraint {
    pub fn new(id: impl Into<String>, kind: ConstraintKind, entities: &[&str], value: Option<f64>) -> Self {
        Self { id: id.into(), kind, entities: entities.iter().map(|s| s.to_string()).collect(), value }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub dimension: u8,
    pub entities: Vec<Entity>,
    pub constraints: Vec<Constraint>,
}

impl Model {
    pub fn new(dimension: u8) -> Self {
        Self { dimension, entities: Vec::new(), constraints: Vec::new() }
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.id == id)
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// Operand indices of a constraint; `None` if any reference is unresolved.
    pub fn operands(&self, c: &Constraint) -> Option<Vec<usize>> {
        c.entities.iter().map(|id| self.entity_index(id)).collect()
    }

    pub fn total_dof(&self) -> usize {
        self.entities.iter().map(|e| dof_of(e.kind)).sum()
    }

    /// Σ DOC over constraints, using operand kinds. Errors on an invalid constraint.
    pub fn total_doc(&self) -> Result<usize, ModelError> {
        self.constraints.iter().map(|c| self.constraint_doc(c)).sum()
    }

    pub fn constraint_doc(&self, c: &Constraint) -> Result<usize, ModelError> {
        let ops = self.operands(c).ok_or_else(|| ModelError::Invalid(format!("{}: unresolved reference", c.id)))?;
        let kinds: Vec<EntityKind> = ops.iter().map(|&i| self.entities[i].kind).collect();
        c.kind
            .signature(&kinds)
            .ok_or_else(|| ModelError::Invalid(format!("{}: operand kinds do not match {}", c.id, c.kind)))
    }

    pub fn has_fix(&self) -> bool {
        self.constraints.iter().any(|c| c.kind == ConstraintKind::Fix)
    }

    /// Sub-model with the given entities (model order kept) and the constraints
    /// whose operands all lie inside the subset.
    pub fn induced(&self, entity_indices: &[usize]) -> Model {
        let keep: HashSet<usize> = entity_indices.iter().copied().collect();
        let entities =
            self.entities.iter().enumerate().filter(|(i, _)| keep.contains(i)).map(|(_, e)| e.clone()).collect();
        let constraints = self
            .constraints
            .iter()
            .filter(|c| match self.operands(c) {
                Some(ops) => ops.iter().all(|i| keep.contains(i)),
                None => false,
            })
            .cloned()
            .collect();
        Model { dimension: self.dimension, entities, constraints }
    }

    /// Sub-model with the given entities and constraints (model order kept
    /// for both).
    pub fn subsystem(&self, entity_indices: &[usize], constraint_indices: &[usize]) -> Model {
        let keep_e: HashSet<usize> = entity_indices.iter().copied().collect();
        let keep_c: HashSet<usize> = constraint_indices.iter().copied().collect();
        Model {
            dimension: self.dimension,
            entities: (0..self.entities.len())
                .filter(|i| keep_e.contains(i))
                .map(|i| self.entities[i].clone())
                .collect(),
            constraints: (0..self.constraints.len())
                .filter(|i| keep_c.contains(i))
                .map(|i| self.constraints[i].clone())
                .collect(),
        }
    }

    /// Same entities, restricted constraint list (by constraint index).
    pub fn with_constraints(&self, constraint_indices: &[usize]) -> Model {
        Model {
            dimension: self.dimension,
            entities: self.entities.clone(),
            constraints: constraint_indices.iter().map(|&i| self.constraints[i].clone()).collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        let doc: ModelDoc = serde_json::from_str(s).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        doc.try_into()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelDoc::from(self)).expect("model serializes")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid model: {0}")]
    Invalid(String),
}

// JSON document shape. Kept separate so the in-memory kind can fold the
// representation field into the entity kind.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    dimension: u8,
    #[serde(default)]
    entities: Vec<EntityDoc>,
    #[serde(default)]
    constraints: Vec<ConstraintDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityDoc {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    representation: Option<Representation>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintDoc {
    id: String,
    kind: ConstraintKind,
    entities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
}

impl TryFrom<ModelDoc> for Model {
    type Error = ModelError;

    fn try_from(doc: ModelDoc) -> Result<Self, Self::Error> {
        let entities = doc
            .entities
            .into_iter()
            .map(|e| {
                let kind = EntityKind::from_parts(&e.kind, e.representation)
                    .map_err(|m| ModelError::Invalid(format!("entity {}: {m}", e.id)))?;
                Ok(Entity { id: e.id, kind, params: e.params })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let constraints = doc
            .constraints
            .into_iter()
            .map(|c| Constraint { id: c.id, kind: c.kind, entities: c.entities, value: c.value })
            .collect();
        Ok(Model { dimension: doc.dimension, entities, constraints })
    }
}

impl From<&Model> for ModelDoc {
    fn from(m: &Model) -> Self {
        ModelDoc {
            dimension: m.dimension,
            entities: m
                .entities
                .iter()
                .map(|e| EntityDoc {
                    id: e.id.clone(),
                    kind: e.kind.tag().to_string(),
                    params: e.params.clone(),
                    representation: e.kind.representation(),
                })
                .collect(),
            constraints: m
                .constraints
                .iter()
                .map(|c| ConstraintDoc { id: c.id.clone(), kind: c.kind, entities: c.entities.clone(), value: c.value })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    BadDimension,
    DuplicateEntityId,
    DuplicateConstraintId,
    DimensionMismatch,
    ParamLength,
    NonFinite,
    UnresolvedReference,
    Signature,
    MissingValue,
    UnexpectedValue,
    ZeroDistance,
    NegativeDistance,
    AngleRange,
    FixWithoutParams,
    DuplicateConstraint,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::BadDimension => "dimension must be 2 or 3",
            Rule::DuplicateEntityId => "duplicate entity id",
            Rule::DuplicateConstraintId => "duplicate constraint id",
            Rule::DimensionMismatch => "entity kind does not match model dimension",
            Rule::ParamLength => "params length does not match kind",
            Rule::NonFinite => "non-finite number",
            Rule::UnresolvedReference => "unresolved reference",
            Rule::Signature => "operand kinds do not match constraint kind",
            Rule::MissingValue => "missing value",
            Rule::UnexpectedValue => "value given for non-parametric constraint",
            Rule::ZeroDistance => "zero distance; use coincident",
            Rule::NegativeDistance => "negative distance",
            Rule::AngleRange => "angle must lie in (0, pi)",
            Rule::FixWithoutParams => "fix needs the entity params as target",
            Rule::DuplicateConstraint => "duplicate constraint",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Offending entity/constraint id (empty for model-level rules).
    pub subject: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.subject.is_empty() {
            write!(f, "{}", self.rule)
        } else {
            write!(f, "{}: {}", self.subject, self.rule)
        }
    }
}

/// Checks every model invariant. An empty list means the model is valid.
pub fn validate(model: &Model) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |subject: &str, rule: Rule| out.push(Violation { subject: subject.to_string(), rule });

    if model.dimension != 2 && model.dimension != 3 {
        push("", Rule::BadDimension);
    }

    let mut ids: HashMap<&str, usize> = HashMap::new();
    for (i, e) in model.entities.iter().enumerate() {
        if ids.insert(e.id.as_str(), i).is_some() {
            push(&e.id, Rule::DuplicateEntityId);
        }
        if e.kind.dimension() != model.dimension {
            push(&e.id, Rule::DimensionMismatch);
        }
        if let Some(p) = &e.params {
            if p.len() != e.kind.raw_len() {
                push(&e.id, Rule::ParamLength);
            } else if p.iter().any(|v| !v.is_finite()) {
                push(&e.id, Rule::NonFinite);
            }
        }
    }

    let mut cids = HashSet::new();
    let mut seen: HashSet<(ConstraintKind, Vec<usize>, Option<u64>)> = HashSet::new();
    for c in &model.constraints {
        if !cids.insert(c.id.as_str()) {
            push(&c.id, Rule::DuplicateConstraintId);
        }
        let ops: Option<Vec<usize>> = c.entities.iter().map(|id| ids.get(id.as_str()).copied()).collect();
        let Some(ops) = ops else {
            push(&c.id, Rule::UnresolvedReference);
            continue;
        };
        let kinds: Vec<EntityKind> = ops.iter().map(|&i| model.entities[i].kind).collect();
        if c.kind.signature(&kinds).is_none() {
            push(&c.id, Rule::Signature);
        }
        match (c.kind.takes_value(), c.value) {
            (true, None) => push(&c.id, Rule::MissingValue),
            (false, Some(_)) => push(&c.id, Rule::UnexpectedValue),
            (true, Some(v)) if !v.is_finite() => push(&c.id, Rule::NonFinite),
            (true, Some(v)) if c.kind.is_distance() && v == 0.0 => push(&c.id, Rule::ZeroDistance),
            (true, Some(v)) if c.kind.is_distance() && v < 0.0 => push(&c.id, Rule::NegativeDistance),
            (true, Some(v)) if c.kind.is_angle() && !(v > 0.0 && v < std::f64::consts::PI) => {
                push(&c.id, Rule::AngleRange)
            }
            _ => {}
        }
        if c.kind == ConstraintKind::Fix && ops.iter().any(|&i| model.entities[i].params.is_none()) {
            push(&c.id, Rule::FixWithoutParams);
        }
        let mut set = ops.clone();
        set.sort_unstable();
        if !seen.insert((c.kind, set, c.value.map(f64::to_bits))) {
            push(&c.id, Rule::DuplicateConstraint);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn triangle() -> Model {
        let mut m = Model::new(2);
        for p in ["P1", "P2", "P3"] {
            m.entities.push(Entity::new(p, EntityKind::Point2));
        }
        m.entities.push(Entity::new("L1", EntityKind::Line2));
        m.entities.push(Entity::new("L2", EntityKind::Line2));
        m.constraints.push(Constraint::new("d1", ConstraintKind::DistancePp, &["P1", "P2"], Some(10.0)));
        m.constraints.push(Constraint::new("d2", ConstraintKind::DistancePp, &["P2", "P3"], Some(10.0)));
        m.constraints.push(Constraint::new("a", ConstraintKind::AngleLl, &["L1", "L2"], Some(FRAC_PI_4)));
        m.constraints.push(Constraint::new("i1", ConstraintKind::PointOnLine, &["P1", "L1"], None));
        m.constraints.push(Constraint::new("i2", ConstraintKind::PointOnLine, &["P2", "L1"], None));
        m.constraints.push(Constraint::new("i3", ConstraintKind::PointOnLine, &["P2", "L2"], None));
        m.constraints.push(Constraint::new("i4", ConstraintKind::PointOnLine, &["P3", "L2"], None));
        m
    }

    #[test]
    fn dof_table() {
        assert_eq!(dof_of(EntityKind::Point2), 2);
        assert_eq!(dof_of(EntityKind::Line2), 2);
        assert_eq!(dof_of(EntityKind::Circle2), 3);
        assert_eq!(dof_of(EntityKind::Point3), 3);
        assert_eq!(dof_of(EntityKind::Plane3(PlaneScheme::Hessian)), 3);
        assert_eq!(dof_of(EntityKind::Plane3(PlaneScheme::PointNormal)), 5);
        assert_eq!(dof_of(EntityKind::Line3), 5);
    }

    #[test]
    fn doc_table() {
        assert_eq!(doc_of(ConstraintKind::DistancePp, 2), Ok(1));
        assert_eq!(doc_of(ConstraintKind::Coincident, 3), Ok(3));
        assert_eq!(doc_of(ConstraintKind::PointOnLine, 3), Ok(2));
        assert_eq!(doc_of(ConstraintKind::PointOnLine, 2), Ok(1));
        assert_eq!(doc_of(ConstraintKind::Fix, 2), Ok(2));
        assert!(doc_of(ConstraintKind::PointOnPlane, 2).is_err());
        assert!(doc_of(ConstraintKind::DistancePp, 4).is_err());
    }

    #[test]
    fn doc_agrees_with_signature() {
        use EntityKind::*;
        let h = Plane3(PlaneScheme::Hessian);
        let cases: &[(ConstraintKind, &[EntityKind])] = &[
            (ConstraintKind::PointOnLine, &[Point3, Line3]),
            (ConstraintKind::Parallel, &[h, h]),
            (ConstraintKind::Parallel, &[Line2, Line2]),
            (ConstraintKind::Coincident, &[Point2, Point2]),
            (ConstraintKind::LinesIntersect, &[Line3, Line3]),
        ];
        for (k, ops) in cases {
            let dim = ops[0].dimension();
            assert_eq!(k.signature(ops), doc_of(*k, dim).ok(), "{k}");
        }
    }

    #[test]
    fn triangle_is_valid() {
        assert!(validate(&triangle()).is_empty());
        let m = triangle();
        assert_eq!(m.total_dof(), 10);
        assert_eq!(m.total_doc().unwrap(), 7);
    }

    #[test]
    fn unresolved_reference() {
        let mut m = triangle();
        m.constraints.push(Constraint::new("bad", ConstraintKind::DistancePp, &["P1", "Q"], Some(1.0)));
        let v = validate(&m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::UnresolvedReference);
        assert_eq!(v[0].to_string(), "bad: unresolved reference");
    }

    #[test]
    fn zero_distance_rejected() {
        let mut m = triangle();
        m.constraints[0].value = Some(0.0);
        let v = validate(&m);
        assert_eq!(v, vec![Violation { subject: "d1".into(), rule: Rule::ZeroDistance }]);
        assert_eq!(v[0].to_string(), "d1: zero distance; use coincident");
    }

    #[test]
    fn other_violations() {
        let mut m = triangle();
        m.constraints[2].value = Some(4.0);
        m.constraints[3].value = Some(1.0);
        m.entities[0].params = Some(vec![0.0]);
        m.constraints.push(Constraint::new("dup", ConstraintKind::DistancePp, &["P2", "P1"], Some(10.0)));
        m.constraints.push(Constraint::new("sig", ConstraintKind::PointOnPlane, &["P1", "L1"], None));
        let rules: Vec<Rule> = validate(&m).into_iter().map(|v| v.rule).collect();
        assert_eq!(
            rules,
            vec![
                Rule::ParamLength,
                Rule::AngleRange,
                Rule::UnexpectedValue,
                Rule::DuplicateConstraint,
                Rule::Signature
            ]
        );
    }

    #[test]
    fn validate_is_idempotent() {
        let mut m = triangle();
        m.constraints[0].value = Some(0.0);
        let before = m.clone();
        assert_eq!(validate(&m), validate(&m));
        assert_eq!(m, before);
    }

    #[test]
    fn json_round_trip() {
        let src = r#"{"dimension":3,"entities":[
            {"id":"A","kind":"plane3","representation":"point-normal","params":[0,0,0,0,0,1]},
            {"id":"B","kind":"plane3"},
            {"id":"L","kind":"line3"}],
            "constraints":[{"id":"c","kind":"angle-planeplane","entities":["A","B"],"value":1.0}]}"#;
        let m = Model::from_json_str(src).unwrap();
        assert_eq!(m.entities[0].kind, EntityKind::Plane3(PlaneScheme::PointNormal));
        assert_eq!(m.entities[1].kind, EntityKind::Plane3(PlaneScheme::Hessian));
        assert_eq!(m.entities[2].kind, EntityKind::Line3);
        let again = Model::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn parse_errors_carry_position() {
        match Model::from_json_str("{\n \"dimension\": 2,\n \"entities\": [ }") {
            Err(ModelError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Model::from_json_str(
                r#"{"dimension":2,"entities":[{"id":"a","kind":"point2","representation":"hessian"}]}"#
            ),
            Err(ModelError::Invalid(_))
        ));
    }
}
