//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-10;

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Lower Cholesky factor, or a domain error naming `what`.
pub fn cholesky_lower(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain(format!("{what} has non-finite entries")));
    }
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Domain(format!("{what} is not positive definite")))
}

/// `ln |M|` from a lower Cholesky factor of `M`.
pub fn ln_det_from_cholesky(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l.nrows();
    let mut inv = DMatrix::identity(p, p);
    let solved = l.solve_lower_triangular_mut(&mut inv);
    debug_assert!(solved);
    inv
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
///
/// Ties keep the original index order. Each eigenvector's largest-magnitude
/// entry is made positive so the output is deterministic.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let p = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(p, p);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let pivot = v.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// `D diag(a) D'`.
pub fn compose(d: &DMatrix<f64>, a: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = d.clone();
    for (mut col, &ak) in scaled.column_iter_mut().zip(a.iter()) {
        col *= ak;
    }
    let mut out = scaled * d.transpose();
    symmetrize(&mut out);
    out
}

/// Condition number of a symmetric PSD matrix (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Geometric mean of positive entries, via logs.
pub fn geometric_mean(v: &DVector<f64>) -> f64 {
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigen_sorted_descending_with_sign_convention() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 3.0, 0.1, 0.0, 0.1, 1.0]);
        let (vals, vecs) = sym_eigen_sorted(&m);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        for col in vecs.column_iter() {
            let pivot = col.iter().copied().fold(0.0_f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(pivot > 0.0);
        }
        let back = compose(&vecs, &vals);
        assert_relative_eq!(back, m, epsilon = 1e-12);
    }

    #[test]
    fn eigen_ties_keep_index_order() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 2.0]));
        let (vals, vecs) = sym_eigen_sorted(&m);
        assert_eq!(vals.as_slice(), &[2.0, 2.0, 1.0]);
        assert_relative_eq!(vecs[(1, 0)], 1.0);
        assert_relative_eq!(vecs[(2, 1)], 1.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = cholesky_lower(&m, "sigma").unwrap_err();
        assert!(err.to_string().contains("sigma"));
    }
}
