use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

/// Default relative rank tolerance: `τ = RANK_REL_TOL · σ_max`.
pub const RANK_REL_TOL: f64 = 1e-8;
const ABS_TOL_FOR_ZERO: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// SVD-based numerical rank of a matrix together with orthonormal bases of
/// `ker J` (columns of `kernel`, n × (n − rank)) and `ker Jᵀ` (columns of
/// `cokernel`, m × (m − rank)).
#[derive(Debug, Clone, Serialize)]
pub struct RankAnalysis {
    pub rows: usize,
    pub cols: usize,
    /// Descending, `min(rows, cols)` values.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub tolerance: f64,
    #[serde(skip)]
    pub kernel: DMatrix<f64>,
    #[serde(skip)]
    pub cokernel: DMatrix<f64>,
}

impl RankAnalysis {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn kernel_dim(&self) -> usize {
        self.cols - self.rank
    }

    pub fn cokernel_dim(&self) -> usize {
        self.rows - self.rank
    }
}

pub fn rank_analyze(j: &DMatrix<f64>) -> Result<RankAnalysis, RankError> {
    rank_analyze_with(j, RANK_REL_TOL)
}

pub fn rank_analyze_with(j: &DMatrix<f64>, rel_tol: f64) -> Result<RankAnalysis, RankError> {
    let (m, n) = j.shape();
    for col in 0..n {
        for row in 0..m {
            if !j[(row, col)].is_finite() {
                return Err(RankError::NonFinite { row, col });
            }
        }
    }

    let mut singular_values = sorted_singular_values(j);
    singular_values.truncate(m.min(n));
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let tolerance = if sigma_max > 0.0 { rel_tol * sigma_max } else { ABS_TOL_FOR_ZERO };
    let rank = singular_values.iter().filter(|s| **s > tolerance).count();

    let kernel = null_space(j, n - rank);
    let cokernel = null_space(&j.transpose(), m - rank);
    Ok(RankAnalysis { rows: m, cols: n, singular_values, rank, tolerance, kernel, cokernel })
}

fn sorted_singular_values(j: &DMatrix<f64>) -> Vec<f64> {
    if j.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = j.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis (as columns) of the right null space of `a`, taking the
/// `dim` right singular vectors with the smallest singular values.
fn null_space(a: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if dim == 0 {
        return DMatrix::zeros(n, 0);
    }
    if m == 0 {
        return DMatrix::identity(n, n);
    }
    // Pad with zero rows so the SVD yields all n right singular vectors.
    let padded = if m < n { a.clone().resize_vertically(n, 0.0) } else { a.clone() };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&p, &q| svd.singular_values[p].total_cmp(&svd.singular_values[q]));
    let mut basis = DMatrix::zeros(n, dim);
    for (k, &row) in order.iter().take(dim).enumerate() {
        basis.set_column(k, &v_t.row(row).transpose());
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_full_rank() {
        let a = rank_analyze(&DMatrix::identity(6, 6)).unwrap();
        assert_eq!(a.rank, 6);
        assert_eq!((a.kernel.ncols(), a.cokernel.ncols()), (0, 0));
    }

    #[test]
    fn empty_and_zero_matrices() {
        let a = rank_analyze(&DMatrix::zeros(0, 3)).unwrap();
        assert_eq!((a.rank, a.kernel.ncols(), a.cokernel.ncols()), (0, 3, 0));
        let z = rank_analyze(&DMatrix::zeros(2, 3)).unwrap();
        assert_eq!((z.rank, z.tolerance), (0, 1e-12));
        assert_eq!((z.kernel.shape(), z.cokernel.shape()), ((3, 3), (2, 2)));
    }

    #[test]
    fn kernels_annihilate() {
        let j = DMatrix::from_row_slice(3, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0, 0.0, 1.0, 0.0, 1.0]);
        let a = rank_analyze(&j).unwrap();
        assert_eq!(a.rank, 2);
        assert_eq!((a.kernel.ncols(), a.cokernel.ncols()), (2, 1));
        assert!((&j * &a.kernel).amax() <= a.tolerance);
        assert!((j.transpose() * &a.cokernel).amax() <= a.tolerance);
        let gram = a.kernel.transpose() * &a.kernel;
        assert!((gram - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let j = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert_eq!(rank_analyze(&j).unwrap_err(), RankError::NonFinite { row: 0, col: 1 });
    }

    #[test]
    fn singular_values_descend() {
        let j = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 3.0]);
        assert_eq!(rank_analyze(&j).unwrap().singular_values, vec![3.0, 0.5]);
    }
}
