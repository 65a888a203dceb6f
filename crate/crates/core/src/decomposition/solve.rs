use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::align::{fit_rigid, AlignError};
use super::{ClusterNode, ClusterTree, DecompositionError, MergeRule, ALIGN_TOL};
use crate::equations::{add_anchors, compile, eval_residuals, CompileError, EntitySlot, ResidualSystem};
use crate::model::{Constraint, ConstraintKind, EntityKind, Model};
use crate::numeric::{newton_solve, SolveOptions, SolveResult};
use crate::witness::{apply_rigid_motion, normalize_directions, RigidMotion};

/// Entity id to parameter vector, in one cluster's frame.
pub type Positions = BTreeMap<String, Vec<f64>>;

/// Rigid placement of a solved leaf cluster into the global frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placement {
    pub cluster: Vec<String>,
    /// Planar rotation angle (2D) in radians.
    pub angle: f64,
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RecombinePlan {
    /// Leaves in solve order with their placements.
    pub placements: Vec<Placement>,
    /// Values assigned to virtual bonds, in the order they were measured.
    pub bonds: Vec<(String, f64)>,
    /// Assignment in the variable order of the compiled model.
    pub x: Vec<f64>,
    /// Residual norm of the whole system at `x`.
    pub residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct AnchoredSolve {
    /// The model's system without anchor rows.
    pub system: ResidualSystem,
    pub result: SolveResult,
    /// Whether anchor rows were used.
    pub anchored: bool,
}

/// Fills missing entity parameters with seeded samples from U[−1, 1];
/// directions and normals are normalized and radii made non-negative.
pub fn initial_guess(model: &Model, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = model.clone();
    for e in &mut out.entities {
        if e.params.is_some() {
            continue;
        }
        let mut p: Vec<f64> = (0..e.kind.raw_len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        normalize_directions(e.kind, &mut p);
        if e.kind == EntityKind::Circle2 {
            p[2] = p[2].abs();
        }
        e.params = Some(p);
    }
    out
}

fn point_at(kind: EntityKind, p: &[f64]) -> Option<Vector3<f64>> {
    match kind {
        EntityKind::Point2 => Some(Vector3::new(p[0], p[1], 0.0)),
        EntityKind::Point3 => Some(Vector3::new(p[0], p[1], p[2])),
        _ => None,
    }
}

/// Motion taking the first points of `x` to the anchored frame: first point
/// at the origin, second on the x axis, third (3D) in the xy plane.
fn anchor_frame(system: &ResidualSystem, x: &[f64]) -> Option<RigidMotion> {
    let pts: Vec<Vector3<f64>> = system.entities.iter().filter_map(|s| point_at(s.kind, &x[s.range()])).collect();
    let needed = if system.dimension == 2 { 2 } else { 3 };
    if pts.len() < needed {
        return None;
    }
    let u = pts[1] - pts[0];
    if u.norm() < 1e-12 {
        return None;
    }
    let rotation = if system.dimension == 2 {
        RigidMotion::planar(-u.y.atan2(u.x), 0.0, 0.0).rotation
    } else {
        let e1 = u.normalize();
        let w = pts[2] - pts[0];
        let v = w - e1 * e1.dot(&w);
        if v.norm() < 1e-12 {
            return None;
        }
        let e2 = v.normalize();
        let e3 = e1.cross(&e2);
        nalgebra::Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()])
    };
    Some(RigidMotion { rotation, translation: -(rotation * pts[0]) })
}

/// Solves the model from its entity parameters. The start is moved into
/// the anchored frame, solved with anchor rows by Newton, and moved back,
/// so the result stays near the start. Without enough distinct points the
/// system is solved as is.
pub fn solve_anchored(model: &Model, opts: &SolveOptions) -> Result<AnchoredSolve, CompileError> {
    let system = compile(model)?;
    let x0 = system.values();
    let frame = anchor_frame(&system, &x0);
    let Some(frame) = frame else {
        let result = newton_solve(&system, &x0, opts);
        return Ok(AnchoredSolve { system, result, anchored: false });
    };
    let anchored = add_anchors(&system, model.dimension)?;
    let y0 = apply_rigid_motion(&system.entities, &x0, &frame);
    let mut result = newton_solve(&anchored, &y0, opts);
    result.x = apply_rigid_motion(&system.entities, &result.x, &frame.inverse());
    Ok(AnchoredSolve { system, result, anchored: true })
}

/// Rigid motion placing `moving` onto `target` through their shared
/// points. Fails when fewer than two (2D) or three (3D) shared points are
/// given or when the fit leaves a residual above the alignment tolerance.
pub fn place_on_shared(
    model: &Model,
    target: &Positions,
    moving: &Positions,
    shared: &[String],
) -> Result<RigidMotion, AlignError> {
    let needed = if model.dimension == 2 { 2 } else { 3 };
    let mut from = Vec::new();
    let mut to = Vec::new();
    for id in shared {
        let kind = model.entity(id).map(|e| e.kind);
        let (Some(kind), Some(t), Some(m)) = (kind, target.get(id), moving.get(id)) else { continue };
        if let (Some(p), Some(q)) = (point_at(kind, m), point_at(kind, t)) {
            from.push(p);
            to.push(q);
        }
    }
    if from.len() < needed {
        return Err(AlignError::TooFewPoints { needed, got: from.len() });
    }
    let (motion, residual) = fit_rigid(&from, &to, model.dimension == 2)?;
    if residual > ALIGN_TOL {
        return Err(AlignError::Mismatch { residual });
    }
    Ok(motion)
}

struct Frame {
    pos: Positions,
    /// Leaves solved under this node, with motions into this node's frame.
    leaves: Vec<(Vec<String>, RigidMotion)>,
}

struct Ctx<'a> {
    model: &'a Model,
    constraints: HashMap<String, Constraint>,
    opts: &'a SolveOptions,
    bonds: Vec<(String, f64)>,
}

impl Frame {
    fn moved(mut self, model: &Model, motion: &RigidMotion) -> Frame {
        for (id, p) in self.pos.iter_mut() {
            let kind = model.entity(id).expect("known entity").kind;
            *p = apply_rigid_motion(&[EntitySlot { id: id.clone(), kind, offset: 0 }], p, motion);
        }
        for (_, m) in self.leaves.iter_mut() {
            *m = m.then(motion);
        }
        self
    }

    fn absorb(&mut self, other: Frame) {
        for (id, p) in other.pos {
            self.pos.entry(id).or_insert(p);
        }
        self.leaves.extend(other.leaves);
    }
}

fn shared_ids(a: &Positions, b: &Positions) -> Vec<String> {
    a.keys().filter(|k| b.contains_key(*k)).cloned().collect()
}

impl Ctx<'_> {
    fn solve_cluster(&self, entities: &[String], constraints: &[String]) -> Result<Frame, DecompositionError> {
        let mut sub = Model::new(self.model.dimension);
        sub.entities = entities
            .iter()
            .map(|id| self.model.entity(id).cloned().ok_or_else(|| DecompositionError::UnknownConstraint(id.clone())))
            .collect::<Result<_, _>>()?;
        sub.constraints = constraints
            .iter()
            .map(|id| {
                self.constraints.get(id).cloned().ok_or_else(|| DecompositionError::UnknownConstraint(id.clone()))
            })
            .collect::<Result<_, _>>()?;
        let fail =
            |message: String, status| DecompositionError::ClusterSolve { cluster: entities.to_vec(), message, status };
        let solved = solve_anchored(&sub, self.opts).map_err(|e| fail(e.to_string(), None))?;
        if !solved.result.converged() {
            let r = &solved.result;
            return Err(fail(r.diagnostic.clone().unwrap_or_else(|| format!("{:?}", r.status)), Some(r.status)));
        }
        let pos = solved.system.entities.iter().map(|s| (s.id.clone(), solved.result.x[s.range()].to_vec())).collect();
        Ok(Frame { pos, leaves: vec![(entities.to_vec(), RigidMotion::identity())] })
    }

    fn solve_node(&mut self, node: &ClusterNode) -> Result<Frame, DecompositionError> {
        match node {
            ClusterNode::Leaf { entities, constraints } | ClusterNode::Irreducible { entities, constraints, .. } => {
                self.solve_cluster(entities, constraints)
            }
            ClusterNode::Merge { rule: MergeRule::Triple, children, .. } => self.solve_triple(children),
            ClusterNode::Merge { children, .. } => {
                let mut acc: Option<Frame> = None;
                for child in children {
                    let f = self.solve_node(child)?;
                    acc = Some(match acc {
                        None => f,
                        Some(mut a) => {
                            let m = place_on_shared(self.model, &a.pos, &f.pos, &shared_ids(&a.pos, &f.pos))?;
                            a.absorb(f.moved(self.model, &m));
                            a
                        }
                    });
                }
                acc.ok_or(DecompositionError::Incomplete)
            }
            ClusterNode::Split { pair, donor, bond, children, .. } => {
                let mut d = self.solve_node(&children[*donor])?;
                let (pa, pb) = (&d.pos[&pair[0]], &d.pos[&pair[1]]);
                let value = pa.iter().zip(pb).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                self.bonds.push((bond.id.clone(), value));
                self.constraints.insert(
                    bond.id.clone(),
                    Constraint::new(bond.id.clone(), ConstraintKind::DistancePp, &[&pair[0], &pair[1]], Some(value)),
                );
                let r = self.solve_node(&children[1 - donor])?;
                let m = place_on_shared(self.model, &d.pos, &r.pos, pair)?;
                d.absorb(r.moved(self.model, &m));
                Ok(d)
            }
        }
    }

    /// Three clusters pairwise sharing one point: the triangle of shared
    /// points is built in the first cluster's frame from distances measured
    /// in the other two, with the orientation of the initial guess.
    fn solve_triple(&mut self, children: &[ClusterNode]) -> Result<Frame, DecompositionError> {
        let mut a = self.solve_node(&children[0])?;
        let b = self.solve_node(&children[1])?;
        let c = self.solve_node(&children[2])?;
        let one =
            |x: &Positions, y: &Positions| shared_ids(x, y).into_iter().next().ok_or(DecompositionError::Incomplete);
        let (sab, sac, sbc) = (one(&a.pos, &b.pos)?, one(&a.pos, &c.pos)?, one(&b.pos, &c.pos)?);
        let dist = |f: &Positions, p: &str, q: &str| ((f[p][0] - f[q][0]).powi(2) + (f[p][1] - f[q][1]).powi(2)).sqrt();
        let (p0, p1) =
            (Vector3::new(a.pos[&sab][0], a.pos[&sab][1], 0.0), Vector3::new(a.pos[&sac][0], a.pos[&sac][1], 0.0));
        let (r0, r1) = (dist(&b.pos, &sab, &sbc), dist(&c.pos, &sac, &sbc));
        let d = (p1 - p0).norm();
        let along = (d * d + r0 * r0 - r1 * r1) / (2.0 * d);
        let h2 = r0 * r0 - along * along;
        if d < 1e-12 || h2 < -ALIGN_TOL {
            return Err(AlignError::Mismatch { residual: (-h2).max(0.0).sqrt() }.into());
        }
        let u = (p1 - p0) / d;
        let n = Vector3::new(-u.y, u.x, 0.0);
        let guess = |id: &str| {
            let p = self.model.entity(id).and_then(|e| e.params.clone()).unwrap_or_default();
            Vector3::new(p.first().copied().unwrap_or(0.0), p.get(1).copied().unwrap_or(0.0), 0.0)
        };
        let (g0, g1, g2) = (guess(&sab), guess(&sac), guess(&sbc));
        let sign = if (g1 - g0).cross(&(g2 - g0)).z >= 0.0 { 1.0 } else { -1.0 };
        let p2 = p0 + u * along + n * (sign * h2.max(0.0).sqrt());
        let mut target = a.pos.clone();
        target.insert(sbc.clone(), vec![p2.x, p2.y]);
        let mb = place_on_shared(self.model, &target, &b.pos, &[sab.clone(), sbc.clone()])?;
        let mc = place_on_shared(self.model, &target, &c.pos, &[sac.clone(), sbc.clone()])?;
        a.absorb(b.moved(self.model, &mb));
        a.absorb(c.moved(self.model, &mc));
        Ok(a)
    }
}

/// Solves every leaf of a complete tree from the model's entity parameters
/// and assembles the global configuration by rigid placement, bottom-up.
pub fn solve_tree(tree: &ClusterTree, model: &Model, opts: &SolveOptions) -> Result<RecombinePlan, DecompositionError> {
    if !tree.is_complete() {
        return Err(DecompositionError::Incomplete);
    }
    let mut ctx = Ctx {
        model,
        constraints: model.constraints.iter().map(|c| (c.id.clone(), c.clone())).collect(),
        opts,
        bonds: Vec::new(),
    };
    let root = ctx.solve_node(&tree.roots[0])?;
    let system = compile(model).map_err(|e| DecompositionError::ClusterSolve {
        cluster: model.entities.iter().map(|e| e.id.clone()).collect(),
        message: e.to_string(),
        status: None,
    })?;
    let mut x = vec![0.0; system.num_vars()];
    for slot in &system.entities {
        let p = root.pos.get(&slot.id).ok_or(DecompositionError::Incomplete)?;
        x[slot.range()].copy_from_slice(p);
    }
    let residual_norm =
        eval_residuals(&system, &x).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).unwrap_or(f64::INFINITY);
    let placements = root
        .leaves
        .into_iter()
        .map(|(cluster, m)| Placement {
            cluster,
            angle: m.planar_angle(),
            translation: [m.translation.x, m.translation.y, m.translation.z],
        })
        .collect();
    Ok(RecombinePlan { placements, bonds: ctx.bonds, x, residual_norm })
}
