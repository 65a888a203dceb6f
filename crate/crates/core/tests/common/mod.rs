#![allow(dead_code)]

use gcs_core::equations::{eval_residuals, ResidualSystem};
use gcs_core::model::Model;
use nalgebra::{DMatrix, Matrix2, Vector2};

pub fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> Model {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    Model::from_json_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

/// Sorted names of the 2D corpus fixtures.
pub fn corpus() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixture_path("corpus"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json"))
        .map(|n| format!("corpus/{n}"))
        .collect();
    names.sort();
    names
}

/// Central differences of the residual vector.
pub fn fd_jacobian(system: &ResidualSystem, x: &[f64], h: f64) -> DMatrix<f64> {
    let m = system.num_residuals();
    let n = x.len();
    let mut j = DMatrix::zeros(m, n);
    for c in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[c] += h;
        xm[c] -= h;
        let rp = eval_residuals(system, &xp).unwrap();
        let rm = eval_residuals(system, &xm).unwrap();
        for r in 0..m {
            j[(r, c)] = (rp[r] - rm[r]) / (2.0 * h);
        }
    }
    j
}

/// Rank by Gaussian elimination with full pivoting; entries below
/// `tol · max|a|` count as zero.
pub fn gauss_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    let mut a = a.clone();
    let (m, n) = a.shape();
    let scale = a.amax();
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    while rank < m.min(n) {
        let mut best = (rank, rank, 0.0);
        for r in rank..m {
            for c in rank..n {
                if a[(r, c)].abs() > best.2 {
                    best = (r, c, a[(r, c)].abs());
                }
            }
        }
        if best.2 <= tol * scale {
            break;
        }
        a.swap_rows(rank, best.0);
        a.swap_columns(rank, best.1);
        let p = a[(rank, rank)];
        for r in rank + 1..m {
            let f = a[(r, rank)] / p;
            for c in rank..n {
                a[(r, c)] -= f * a[(rank, c)];
            }
        }
        rank += 1;
    }
    rank
}

/// Max point deviation after the best proper planar rigid alignment of
/// `a` onto `b` (Kabsch through a 2x2 SVD).
pub fn aligned_deviation(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ca = a.iter().fold(Vector2::zeros(), |s, p| s + Vector2::new(p[0], p[1])) / n;
    let cb = b.iter().fold(Vector2::zeros(), |s, p| s + Vector2::new(p[0], p[1])) / n;
    let mut h = Matrix2::zeros();
    for (p, q) in a.iter().zip(b) {
        h += (Vector2::new(p[0], p[1]) - ca) * (Vector2::new(q[0], q[1]) - cb).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (vt.transpose() * u.transpose()).determinant().signum();
    let r = vt.transpose() * Matrix2::new(1.0, 0.0, 0.0, d) * u.transpose();
    a.iter()
        .zip(b)
        .map(|(p, q)| (r * (Vector2::new(p[0], p[1]) - ca) + cb - Vector2::new(q[0], q[1])).norm())
        .fold(0.0, f64::max)
}

/// Point coordinates of a planar point model from an assignment in
/// compile order (two variables per point).
pub fn points(x: &[f64]) -> Vec<[f64; 2]> {
    x.chunks(2).map(|c| [c[0], c[1]]).collect()
}
