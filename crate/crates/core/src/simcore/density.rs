use nalgebra::DMatrix;
use num_complex::Complex64;

use super::linalg;
use super::state::{n_qubits_for_len, PureState};
use crate::error::{QsnapError, Result};
use crate::tolerance::TOL;

/// Hermitian, unit-trace, positive semidefinite matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// Validates and wraps a row-major `2^n x 2^n` matrix.
    pub fn new(n_qubits: usize, data: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if data.len() != dim * dim {
            return Err(QsnapError::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        let rho = DensityMatrix { n_qubits, data };
        rho.check()?;
        Ok(rho)
    }

    /// Builds from a flat row-major buffer whose length determines `n`.
    pub fn from_flat(data: Vec<Complex64>) -> Result<Self> {
        let dim = (data.len() as f64).sqrt().round() as usize;
        if dim * dim != data.len() {
            return Err(QsnapError::Shape(format!("{} entries do not form a square matrix", data.len())));
        }
        let n = n_qubits_for_len(dim)?;
        Self::new(n, data)
    }

    pub(crate) fn from_raw_unchecked(n_qubits: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), 1 << (2 * n_qubits));
        DensityMatrix { n_qubits, data }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let a = psi.amplitudes();
        let dim = a.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(a[r] * a[c].conj());
            }
        }
        DensityMatrix { n_qubits: psi.n_qubits(), data }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        DensityMatrix { n_qubits, data }
    }

    pub fn zero_state(n_qubits: usize) -> Self {
        Self::from_pure(&PureState::zero(n_qubits))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.data[r * d + c] - self.data[c * d + r].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.to_matrix())
    }

    /// Checks the density-matrix invariants.
    pub fn check(&self) -> Result<()> {
        let herm = self.hermiticity_residual();
        if herm > TOL.structural {
            return Err(QsnapError::InvalidParameter(format!("matrix is not Hermitian (residual {herm:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TOL.structural || tr.im.abs() > TOL.structural {
            return Err(QsnapError::InvalidParameter(format!("trace {tr} differs from 1")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -TOL.psd_slack {
            return Err(QsnapError::NotPositive(min));
        }
        Ok(())
    }

    /// Hilbert-Schmidt inner product Tr(self * other).
    pub fn hs_inner(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(QsnapError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let d = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..d {
            for c in 0..d {
                acc += self.data[r * d + c] * other.data[c * d + r];
            }
        }
        Ok(acc.re)
    }

    /// <psi| self |psi>
    pub fn expectation_pure(&self, psi: &PureState) -> Result<f64> {
        if self.dim() != psi.dim() {
            return Err(QsnapError::DimensionMismatch { expected: self.dim(), got: psi.dim() });
        }
        let a = psi.amplitudes();
        let d = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..d {
            let row: Complex64 = (0..d).map(|c| self.data[r * d + c] * a[c]).sum();
            acc += a[r].conj() * row;
        }
        Ok(acc.re)
    }

    /// Largest elementwise distance to another matrix of equal size.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.data)
    }

    pub(crate) fn from_matrix_unchecked(n_qubits: usize, m: &DMatrix<Complex64>) -> Self {
        let d = m.nrows();
        let mut data = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                data.push(m[(r, c)]);
            }
        }
        DensityMatrix { n_qubits, data }
    }

    /// Kronecker product, `self` on the lower qubit indices.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits + other.n_qubits,
            data: super::kernel::kron(&self.data, &other.data),
        }
    }
}
