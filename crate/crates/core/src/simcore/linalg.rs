//! Dense Hermitian and polar decompositions backed by nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{QsnapError, Result};
use crate::tolerance::TOL;

fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()).map(|x| x * 0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(hermitize(m)).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Eigen-decomposition of a Hermitian matrix: (eigenvalues, eigenvector columns).
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(hermitize(m));
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &DMatrix<Complex64>, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
    let (vals, vecs) = hermitian_eigen(m);
    let d = m.nrows();
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let s = f(lam);
        for i in 0..d {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

/// Principal square root of a PSD matrix; negative eigenvalues clamp to zero.
pub fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    hermitian_fn(m, |x| x.max(0.0).sqrt())
}

/// Unitary factor of the polar decomposition `M = U P`, i.e. the nearest
/// unitary to `M` in Frobenius norm.
pub fn polar_unitary(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let svd = m.clone().svd(true, true);
    let smallest = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smallest > TOL.singular_floor) {
        return Err(QsnapError::Singular(smallest));
    }
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(QsnapError::Singular(smallest)),
    };
    Ok(u * v_t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.7, 0.0),
                Complex64::new(0.1, 0.2),
                Complex64::new(0.1, -0.2),
                Complex64::new(0.3, 0.0),
            ],
        );
        let s = psd_sqrt(&m);
        let back = &s * &s;
        assert!((back - m).iter().all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn polar_of_scaled_unitary_removes_scale() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0 * h, 0.0),
                Complex64::new(2.0 * h, 0.0),
                Complex64::new(2.0 * h, 0.0),
                Complex64::new(-2.0 * h, 0.0),
            ],
        );
        let u = polar_unitary(&m).unwrap();
        assert!((u - m.map(|x| x * 0.5)).iter().all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn polar_rejects_singular() {
        let m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(polar_unitary(&m), Err(QsnapError::Singular(_))));
    }
}
