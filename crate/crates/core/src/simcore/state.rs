use num_complex::Complex64;

use crate::error::{QsnapError, Result};
use crate::tolerance::TOL;

/// Normalized pure state over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

pub(crate) fn n_qubits_for_len(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(QsnapError::Shape(format!(
            "amplitude vector length {len} is not a power of two >= 2"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}

impl PureState {
    /// |0...0> on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    /// Computational basis state |index>, qubit 0 being the most significant bit.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        assert!(n_qubits >= 1, "a register needs at least one qubit");
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        PureState { n_qubits, amps }
    }

    /// Wraps amplitudes that are already unit norm.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = n_qubits_for_len(amps.len())?;
        let norm = l2(&amps);
        if (norm - 1.0).abs() > TOL.structural {
            return Err(QsnapError::InvalidParameter(format!(
                "amplitudes have norm {norm}, expected 1"
            )));
        }
        Ok(PureState { n_qubits, amps })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = n_qubits_for_len(amps.len())?;
        let norm = l2(&amps);
        if !(norm > TOL.degenerate_norm) || !norm.is_finite() {
            return Err(QsnapError::ZeroNorm(norm));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(PureState { n_qubits, amps })
    }

    /// Builds a state from separate real and imaginary parts, normalizing.
    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(QsnapError::DimensionMismatch { expected: re.len(), got: im.len() });
        }
        Self::normalized(re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect())
    }

    pub(crate) fn from_raw_unchecked(n_qubits: usize, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        PureState { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        l2(&self.amps)
    }

    /// <self|other>
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(QsnapError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.re).collect()
    }

    pub fn imag_parts(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.im).collect()
    }

    /// Multiplies every amplitude by `phase` (expected unit modulus).
    pub fn with_global_phase(&self, phase: Complex64) -> PureState {
        PureState {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|a| a * phase).collect(),
        }
    }

    /// Born probability of each basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub(crate) fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}
