use nalgebra::{DMatrix, Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equations::{EntitySlot, ResidualSystem};
use crate::model::{EntityKind, PlaneScheme};
use crate::numeric::{rank_analyze, RankAnalysis};

/// Rigid motion `p ↦ R·p + t`. Planar motions rotate about the z-axis and
/// leave z untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn planar(theta: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0), translation: Vector3::new(tx, ty, 0.0) }
    }

    /// Rotation by the axis-angle vector `omega` followed by translation `t`.
    pub fn spatial(omega: Vector3<f64>, t: Vector3<f64>) -> Self {
        Self { rotation: Rotation3::new(omega).into_inner(), translation: t }
    }

    /// Angle of the planar part of the rotation.
    pub fn planar_angle(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    pub fn then(&self, next: &RigidMotion) -> RigidMotion {
        RigidMotion {
            rotation: next.rotation * self.rotation,
            translation: next.rotation * self.translation + next.translation,
        }
    }

    pub fn inverse(&self) -> RigidMotion {
        let rt = self.rotation.transpose();
        RigidMotion { rotation: rt, translation: -(rt * self.translation) }
    }
}

fn v3(x: &[f64], at: usize) -> Vector3<f64> {
    Vector3::new(x[at], x[at + 1], x[at + 2])
}

fn put3(x: &mut [f64], at: usize, v: &Vector3<f64>) {
    x[at..at + 3].copy_from_slice(v.as_slice());
}

/// Applies a rigid motion to every entity's parameters.
pub fn apply_rigid_motion(slots: &[EntitySlot], x: &[f64], motion: &RigidMotion) -> Vec<f64> {
    let mut out = x.to_vec();
    let r = &motion.rotation;
    let t = &motion.translation;
    for slot in slots {
        let o = slot.offset;
        match slot.kind {
            EntityKind::Point2 | EntityKind::Circle2 => {
                let p = r * Vector3::new(x[o], x[o + 1], 0.0) + t;
                out[o] = p.x;
                out[o + 1] = p.y;
            }
            EntityKind::Line2 => {
                let phi = x[o] + motion.planar_angle();
                out[o] = phi;
                out[o + 1] = x[o + 1] + phi.cos() * t.x + phi.sin() * t.y;
            }
            EntityKind::Point3 => put3(&mut out, o, &(r * v3(x, o) + t)),
            EntityKind::Line3 | EntityKind::Plane3(PlaneScheme::PointNormal) => {
                put3(&mut out, o, &(r * v3(x, o) + t));
                put3(&mut out, o + 3, &(r * v3(x, o + 3)));
            }
            EntityKind::Plane3(PlaneScheme::Hessian) => {
                let n = r * v3(x, o);
                put3(&mut out, o, &n);
                out[o + 3] = x[o + 3] - n.dot(t);
            }
        }
    }
    out
}

/// Infinitesimal generators: translations along each axis, then rotations
/// about each axis through the origin (only about z in 2D).
fn generators(dimension: u8) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let e = [Vector3::x(), Vector3::y(), Vector3::z()];
    let zero = Vector3::zeros();
    if dimension == 2 {
        vec![(e[0], zero), (e[1], zero), (zero, e[2])]
    } else {
        let mut g: Vec<_> = e.iter().map(|u| (*u, zero)).collect();
        g.extend(e.iter().map(|w| (zero, *w)));
        g
    }
}

/// Rows are the parameter-space velocities of the 3 (2D) or 6 (3D) motion
/// generators at configuration `x`.
pub fn motion_basis(system: &ResidualSystem, x: &[f64]) -> DMatrix<f64> {
    basis_for(&system.entities, system.dimension, x.len(), x)
}

fn basis_for(slots: &[EntitySlot], dimension: u8, n: usize, x: &[f64]) -> DMatrix<f64> {
    let gens = generators(dimension);
    let mut m = DMatrix::zeros(gens.len(), n);
    for (row, (u, w)) in gens.iter().enumerate() {
        for slot in slots {
            let o = slot.offset;
            let mut set = |k: usize, v: f64| m[(row, o + k)] = v;
            match slot.kind {
                EntityKind::Point2 | EntityKind::Circle2 => {
                    set(0, u.x - w.z * x[o + 1]);
                    set(1, u.y + w.z * x[o]);
                }
                EntityKind::Line2 => {
                    set(0, w.z);
                    set(1, x[o].cos() * u.x + x[o].sin() * u.y);
                }
                EntityKind::Point3 => {
                    let v = u + w.cross(&v3(x, o));
                    (0..3).for_each(|k| set(k, v[k]));
                }
                EntityKind::Line3 | EntityKind::Plane3(PlaneScheme::PointNormal) => {
                    let vp = u + w.cross(&v3(x, o));
                    let vd = w.cross(&v3(x, o + 3));
                    (0..3).for_each(|k| set(k, vp[k]));
                    (0..3).for_each(|k| set(3 + k, vd[k]));
                }
                EntityKind::Plane3(PlaneScheme::Hessian) => {
                    let n = v3(x, o);
                    let vn = w.cross(&n);
                    (0..3).for_each(|k| set(k, vn[k]));
                    set(3, -n.dot(u));
                }
            }
        }
    }
    m
}

#[derive(Debug, Clone, Serialize)]
pub struct DorResult {
    pub dor: usize,
    pub analysis: RankAnalysis,
}

/// Degree of rigidity: rank of the motion basis at the configuration.
pub fn compute_dor(system: &ResidualSystem, x: &[f64]) -> DorResult {
    let basis = motion_basis(system, x);
    let analysis = rank_analyze(&basis).expect("motion basis is finite for finite input");
    DorResult { dor: analysis.rank, analysis }
}

/// DOR of entities of the given kinds placed at a seeded random
/// configuration (directions normalized).
pub fn generic_dor(kinds: &[EntityKind], dimension: u8, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots = Vec::new();
    let mut x = Vec::new();
    for (i, &kind) in kinds.iter().enumerate() {
        slots.push(EntitySlot { id: format!("e{i}"), kind, offset: x.len() });
        let start = x.len();
        x.extend((0..kind.raw_len()).map(|_| rng.random_range(-1.0..1.0)));
        normalize_directions(kind, &mut x[start..]);
    }
    let basis = basis_for(&slots, dimension, x.len(), &x);
    rank_analyze(&basis).map(|a| a.rank).unwrap_or(0)
}

/// Scales line directions and plane normals to unit length in place.
pub(crate) fn normalize_directions(kind: EntityKind, params: &mut [f64]) {
    let range = match kind {
        EntityKind::Line3 | EntityKind::Plane3(PlaneScheme::PointNormal) => 3..6,
        EntityKind::Plane3(PlaneScheme::Hessian) => 0..3,
        _ => return,
    };
    let norm = params[range.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        params[range].iter_mut().for_each(|v| *v /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::compile;
    use crate::model::{Entity, Model};

    fn system(dim: u8, entities: Vec<Entity>) -> ResidualSystem {
        let mut m = Model::new(dim);
        m.entities = entities;
        compile(&m).unwrap()
    }

    #[test]
    fn rows_match_finite_differences() {
        let s = system(
            3,
            vec![
                Entity::new("P", EntityKind::Point3),
                Entity::new("L", EntityKind::Line3),
                Entity::new("H", EntityKind::Plane3(PlaneScheme::Hessian)),
                Entity::new("N", EntityKind::Plane3(PlaneScheme::PointNormal)),
            ],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut x: Vec<f64> = (0..s.num_vars()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for slot in &s.entities {
            normalize_directions(slot.kind, &mut x[slot.range()]);
        }
        let basis = motion_basis(&s, &x);
        let h = 1e-6;
        for (row, (u, w)) in generators(3).into_iter().enumerate() {
            let plus = apply_rigid_motion(&s.entities, &x, &RigidMotion::spatial(w * h, u * h));
            let minus = apply_rigid_motion(&s.entities, &x, &RigidMotion::spatial(-w * h, -u * h));
            for col in 0..x.len() {
                let fd = (plus[col] - minus[col]) / (2.0 * h);
                assert!((fd - basis[(row, col)]).abs() < 1e-6, "row {row} col {col}");
            }
        }
    }

    #[test]
    fn planar_rows_match_finite_differences() {
        let s = system(
            2,
            vec![
                Entity::new("P", EntityKind::Point2),
                Entity::new("L", EntityKind::Line2),
                Entity::new("C", EntityKind::Circle2),
            ],
        );
        let x = [0.3, -0.7, 0.4, 0.9, -0.2, 0.5, 1.5];
        let basis = motion_basis(&s, &x);
        let h = 1e-6;
        let motions = [(0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1.0, 0.0, 0.0)];
        for (row, (th, tx, ty)) in motions.into_iter().enumerate() {
            let plus = apply_rigid_motion(&s.entities, &x, &RigidMotion::planar(th * h, tx * h, ty * h));
            let minus = apply_rigid_motion(&s.entities, &x, &RigidMotion::planar(-th * h, -tx * h, -ty * h));
            for col in 0..x.len() {
                let fd = (plus[col] - minus[col]) / (2.0 * h);
                assert!((fd - basis[(row, col)]).abs() < 1e-6, "row {row} col {col}");
            }
        }
    }

    #[test]
    fn dor_independent_of_rotation_pivot() {
        let s = system(2, vec![Entity::new("A", EntityKind::Point2), Entity::new("B", EntityKind::Point2)]);
        let x = [1.0, 2.0, 4.0, 6.0];
        let shifted = apply_rigid_motion(&s.entities, &x, &RigidMotion::planar(0.0, 100.0, -50.0));
        assert_eq!(compute_dor(&s, &x).dor, compute_dor(&s, &shifted).dor);
    }

    #[test]
    fn generic_values() {
        assert_eq!(generic_dor(&[EntityKind::Point2], 2, 1), 2);
        assert_eq!(generic_dor(&[EntityKind::Point2; 2], 2, 1), 3);
        assert_eq!(generic_dor(&[EntityKind::Point3; 2], 3, 1), 5);
        assert_eq!(generic_dor(&[EntityKind::Line3; 2], 3, 1), 6);
        assert_eq!(generic_dor(&[], 3, 1), 0);
    }

    #[test]
    fn motion_inverse_round_trips() {
        let m = RigidMotion::spatial(Vector3::new(0.1, -0.4, 0.3), Vector3::new(1.0, 2.0, 3.0));
        let id = m.then(&m.inverse());
        assert!((id.rotation - Matrix3::identity()).amax() < 1e-12);
        assert!(id.translation.amax() < 1e-12);
    }
}
