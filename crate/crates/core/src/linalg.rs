//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};

/// Inverse by LU factorization with partial pivoting.
///
/// Returns `None` when a pivot underflows relative to the matrix scale.
pub fn lu_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let tiny = scale * 1e-13 * m.nrows() as f64;
    if u.diagonal().iter().any(|p| p.abs() <= tiny) {
        return None;
    }
    lu.try_inverse()
}

/// Smallest eigenvalue of a symmetric matrix; 0 for an empty matrix.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.nrows() == 2 {
        // closed form keeps the hot stack search allocation free
        let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        return mean - half_gap;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Largest eigenvalue of a symmetric matrix; 0 for an empty matrix.
pub fn max_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
}

/// `|det(m)|` divided by the product of the row norms (Hadamard ratio, in [0, 1]).
pub fn hadamard_ratio(m: &DMatrix<f64>) -> f64 {
    let mut denom = 1.0;
    for r in 0..m.nrows() {
        let norm = m.row(r).norm();
        if norm == 0.0 {
            return 0.0;
        }
        denom *= norm;
    }
    m.clone().lu().determinant().abs() / denom
}

/// `a ⊗ I_n`.
pub fn kron_identity(a: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    a.kronecker(&DMatrix::identity(n, n))
}

/// Concatenates vectors end to end.
pub fn stack(parts: &[&DVector<f64>]) -> DVector<f64> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(*p);
        at += p.len();
    }
    out
}

pub fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_eigenvalue_closed_form_matches_solver() {
        let m = DMatrix::from_row_slice(2, 2, &[5.0, 9.0, 9.0, 17.0]);
        let general = m.clone().symmetric_eigenvalues().min();
        assert!((min_sym_eigenvalue(&m) - general).abs() < 1e-12);
        assert!((min_sym_eigenvalue(&m) - (11.0 - 117f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(lu_inverse(&m).is_none());
        assert_eq!(hadamard_ratio(&m), 0.0);
    }

    #[test]
    fn inverse_of_well_conditioned_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let inv = lu_inverse(&m).unwrap();
        assert!((&m * inv - DMatrix::identity(3, 3)).norm() < 1e-12);
    }
}
