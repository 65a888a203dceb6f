use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::witness::RigidMotion;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("alignment needs {needed} shared points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("shared geometry disagrees: alignment residual {residual:.3e}")]
    Mismatch { residual: f64 },
}

/// Least-squares proper rigid motion (no reflection) taking `from` onto
/// `to`, and the max point distance after the fit. Planar points have z = 0.
pub fn fit_rigid(from: &[Vector3<f64>], to: &[Vector3<f64>], planar: bool) -> Result<(RigidMotion, f64), AlignError> {
    assert_eq!(from.len(), to.len());
    let n = from.len();
    if n == 0 {
        return Err(AlignError::TooFewPoints { needed: 1, got: 0 });
    }
    let cf = from.iter().sum::<Vector3<f64>>() / n as f64;
    let ct = to.iter().sum::<Vector3<f64>>() / n as f64;
    let rotation = if planar {
        let (mut s, mut c) = (0.0, 0.0);
        for (p, q) in from.iter().zip(to) {
            let (a, b) = (p - cf, q - ct);
            c += a.x * b.x + a.y * b.y;
            s += a.x * b.y - a.y * b.x;
        }
        RigidMotion::planar(s.atan2(c), 0.0, 0.0).rotation
    } else {
        let mut h = Matrix3::zeros();
        for (p, q) in from.iter().zip(to) {
            h += (p - cf) * (q - ct).transpose();
        }
        let svd = h.svd(true, true);
        let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        let d = (v_t.transpose() * u.transpose()).determinant().signum();
        v_t.transpose() * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose()
    };
    let motion = RigidMotion { rotation, translation: ct - rotation * cf };
    let residual =
        from.iter().zip(to).map(|(p, q)| (motion.rotation * p + motion.translation - q).norm()).fold(0.0, f64::max);
    Ok((motion, residual))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_planar_motion() {
        let m = RigidMotion::planar(0.7, 3.0, -2.0);
        let from = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.3, 2.0, 0.0)];
        let to: Vec<_> = from.iter().map(|p| m.rotation * p + m.translation).collect();
        let (fit, res) = fit_rigid(&from, &to, true).unwrap();
        assert!(res < 1e-12);
        assert!((fit.rotation - m.rotation).amax() < 1e-12);
    }

    #[test]
    fn recovers_spatial_motion() {
        let m = RigidMotion::spatial(Vector3::new(0.2, -0.5, 0.9), Vector3::new(1.0, 2.0, 3.0));
        let from = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 2.0, 0.0),
            Vector3::new(0.0, 0.0, 3.0),
        ];
        let to: Vec<_> = from.iter().map(|p| m.rotation * p + m.translation).collect();
        let (_, res) = fit_rigid(&from, &to, false).unwrap();
        assert!(res < 1e-12);
    }

    #[test]
    fn reflection_is_not_fitted() {
        let from = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)];
        let to = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, -1.0, 0.0)];
        let (_, res) = fit_rigid(&from, &to, true).unwrap();
        assert!(res > 0.5);
    }
}
