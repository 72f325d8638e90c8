use num_complex::Complex64;
use rand::Rng;

use super::density::DensityMatrix;
use super::gate::{GateKind, GateOp};
use super::kernel::{apply_matrix, bit_of, kron};
use super::state::PureState;
use crate::error::{QsnapError, Result};
use crate::rng::RngStream;
use crate::tolerance::TOL;

fn check_index(q: usize, n_qubits: usize) -> Result<()> {
    if q >= n_qubits {
        return Err(QsnapError::IndexOutOfRange { index: q, n_qubits });
    }
    Ok(())
}

fn unitary_matrix(op: &GateOp, n_qubits: usize) -> Result<Vec<Complex64>> {
    op.validate(n_qubits)?;
    op.kind.matrix().ok_or(QsnapError::NonUnitary(op.kind.name()))
}

impl PureState {
    /// Applies a unitary gate in place.
    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        let m = unitary_matrix(op, self.n_qubits())?;
        let n = self.n_qubits();
        apply_matrix(self.amplitudes_mut(), n, &op.qubits, &m);
        Ok(())
    }

    /// Applies a sequence of unitary gates in place.
    pub fn apply_all<'a>(&mut self, ops: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        ops.into_iter().try_for_each(|op| self.apply(op))
    }

    /// Applies an arbitrary `2^k x 2^k` operator (not necessarily unitary)
    /// without renormalizing.
    pub(crate) fn apply_operator(&mut self, qubits: &[usize], m: &[Complex64]) {
        let n = self.n_qubits();
        apply_matrix(self.amplitudes_mut(), n, qubits, m);
    }

    /// Probability that `qubit` reads 1.
    pub fn prob_one(&self, qubit: usize) -> Result<f64> {
        check_index(qubit, self.n_qubits())?;
        let bit = bit_of(self.n_qubits(), qubit);
        Ok(self
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects `qubit` onto `outcome` and renormalizes.
    pub fn project(&mut self, qubit: usize, outcome: u8) -> Result<()> {
        check_index(qubit, self.n_qubits())?;
        let bit = bit_of(self.n_qubits(), qubit);
        let keep_set = outcome == 1;
        let mut norm_sqr = 0.0;
        let mut discarded = false;
        for (i, a) in self.amplitudes_mut().iter_mut().enumerate() {
            if (i & bit != 0) == keep_set {
                norm_sqr += a.norm_sqr();
            } else if a.norm_sqr() != 0.0 {
                discarded = true;
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let norm = norm_sqr.sqrt();
        if norm < TOL.branch_floor {
            return Err(QsnapError::ZeroProbabilityBranch(norm_sqr));
        }
        // A projection that removed nothing leaves the state bit-identical.
        if discarded {
            self.amplitudes_mut().iter_mut().for_each(|a| *a /= norm);
        }
        Ok(())
    }

    /// Samples a Z-basis measurement of `qubit`, collapsing the state.
    pub fn measure(&mut self, qubit: usize, rng: &mut RngStream) -> Result<u8> {
        let p1 = self.prob_one(qubit)?;
        let u: f64 = rng.random();
        let outcome = u8::from(u < p1);
        self.project(qubit, outcome)?;
        Ok(outcome)
    }
}

impl DensityMatrix {
    /// Applies `rho -> U rho U^dagger` in place.
    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        let m = unitary_matrix(op, self.n_qubits())?;
        let conj: Vec<Complex64> = m.iter().map(|x| x.conj()).collect();
        let n = self.n_qubits();
        let cols: Vec<usize> = op.qubits.iter().map(|q| q + n).collect();
        apply_matrix(self.entries_mut(), 2 * n, &op.qubits, &m);
        apply_matrix(self.entries_mut(), 2 * n, &cols, &conj);
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, ops: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        ops.into_iter().try_for_each(|op| self.apply(op))
    }

    /// Applies a superoperator `S = sum_i K_i (x) conj(K_i)` acting on the
    /// listed qubits. `superop` is `4^k x 4^k` row-major.
    pub(crate) fn apply_superoperator(&mut self, qubits: &[usize], superop: &[Complex64]) {
        let n = self.n_qubits();
        let mut virt: Vec<usize> = qubits.to_vec();
        virt.extend(qubits.iter().map(|q| q + n));
        apply_matrix(self.entries_mut(), 2 * n, &virt, superop);
    }

    /// Probability that `qubit` reads 1.
    pub fn prob_one(&self, qubit: usize) -> Result<f64> {
        check_index(qubit, self.n_qubits())?;
        let bit = bit_of(self.n_qubits(), qubit);
        let d = self.dim();
        Ok((0..d).filter(|i| i & bit != 0).map(|i| self.get(i, i).re).sum())
    }
}

/// Superoperator of the single-qubit reset channel {|0><0|, |0><1|}.
fn reset_superoperator() -> Vec<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let k0 = [o, z, z, z];
    let k1 = [z, o, z, z];
    let conj = |k: &[Complex64; 4]| k.map(|x| x.conj());
    let a = kron(&k0, &conj(&k0));
    let b = kron(&k1, &conj(&k1));
    a.iter().zip(&b).map(|(x, y)| x + y).collect()
}

/// A register that supports reset and exact Z expectations.
pub trait Register: Clone {
    fn n_qubits(&self) -> usize;

    /// Exact <Z> on one qubit.
    fn expectation_z(&self, qubit: usize) -> Result<f64>;

    /// Resets the listed qubits to |0> in place.
    fn reset_in_place(&mut self, qubits: &[usize], rng: &mut RngStream) -> Result<()>;
}

impl Register for PureState {
    fn n_qubits(&self) -> usize {
        PureState::n_qubits(self)
    }

    fn expectation_z(&self, qubit: usize) -> Result<f64> {
        Ok(1.0 - 2.0 * self.prob_one(qubit)?)
    }

    /// Measure, then flip the qubit back to |0> if it read 1.
    fn reset_in_place(&mut self, qubits: &[usize], rng: &mut RngStream) -> Result<()> {
        for &q in qubits {
            if self.measure(q, rng)? == 1 {
                self.apply(&GateOp::x(q))?;
            }
        }
        Ok(())
    }
}

impl Register for DensityMatrix {
    fn n_qubits(&self) -> usize {
        DensityMatrix::n_qubits(self)
    }

    fn expectation_z(&self, qubit: usize) -> Result<f64> {
        Ok(1.0 - 2.0 * self.prob_one(qubit)?)
    }

    /// Reset channel; deterministic, so `rng` is untouched.
    fn reset_in_place(&mut self, qubits: &[usize], _rng: &mut RngStream) -> Result<()> {
        let n = DensityMatrix::n_qubits(self);
        qubits.iter().try_for_each(|&q| check_index(q, n))?;
        let s = reset_superoperator();
        for &q in qubits {
            self.apply_superoperator(&[q], &s);
        }
        Ok(())
    }
}

/// Returns `U|psi>`. Reset and measurement are rejected.
pub fn apply_gate(state: &PureState, op: &GateOp) -> Result<PureState> {
    let mut out = state.clone();
    out.apply(op)?;
    Ok(out)
}

/// Returns `U rho U^dagger`. Reset and measurement are rejected.
pub fn apply_gate_dm(rho: &DensityMatrix, op: &GateOp) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    out.apply(op)?;
    Ok(out)
}

/// Samples a Z measurement of `qubit`; returns the bit and the collapsed state.
pub fn measure_z(state: &PureState, qubit: usize, rng: &mut RngStream) -> Result<(u8, PureState)> {
    let mut out = state.clone();
    let bit = out.measure(qubit, rng)?;
    Ok((bit, out))
}

/// Resets the listed qubits to |0>.
pub fn reset_qubits<R: Register>(state: &R, qubits: &[usize], rng: &mut RngStream) -> Result<R> {
    let mut out = state.clone();
    out.reset_in_place(qubits, rng)?;
    Ok(out)
}

/// Exact <Z> on `qubit`.
pub fn expectation_z<R: Register>(state: &R, qubit: usize) -> Result<f64> {
    state.expectation_z(qubit)
}

/// Reduced density matrix on `keep`; output qubit `j` is input qubit `keep[j]`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.n_qubits();
    if keep.is_empty() {
        return Err(QsnapError::InvalidParameter("partial trace needs at least one kept qubit".into()));
    }
    for (i, &q) in keep.iter().enumerate() {
        check_index(q, n)?;
        if keep[..i].contains(&q) {
            return Err(QsnapError::DuplicateQubit(q));
        }
    }
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let k = keep.len();
    let dk = 1usize << k;
    let dt = 1usize << traced.len();

    let compose = |kept_bits: usize, traced_bits: usize| -> usize {
        let mut idx = 0usize;
        for (j, &q) in keep.iter().enumerate() {
            if kept_bits & (1 << (k - 1 - j)) != 0 {
                idx |= bit_of(n, q);
            }
        }
        for (j, &q) in traced.iter().enumerate() {
            if traced_bits & (1 << (traced.len() - 1 - j)) != 0 {
                idx |= bit_of(n, q);
            }
        }
        idx
    };

    let mut out = vec![Complex64::new(0.0, 0.0); dk * dk];
    for r in 0..dk {
        for c in 0..dk {
            out[r * dk + c] = (0..dt).map(|t| rho.get(compose(r, t), compose(c, t))).sum();
        }
    }
    Ok(DensityMatrix::from_raw_unchecked(k, out))
}

/// Kronecker product `a (x) b`, with `a` on the lower qubit indices.
pub fn tensor(a: &PureState, b: &PureState) -> PureState {
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for x in a.amplitudes() {
        for y in b.amplitudes() {
            amps.push(x * y);
        }
    }
    PureState::from_raw_unchecked(a.n_qubits() + b.n_qubits(), amps)
}

/// Runs a circuit that may contain resets and measurements on a pure state,
/// returning the measured bits in program order.
pub fn run_circuit(state: &mut PureState, ops: &[GateOp], rng: &mut RngStream) -> Result<Vec<u8>> {
    let mut bits = Vec::new();
    for op in ops {
        match op.kind {
            GateKind::Reset => {
                op.validate(state.n_qubits())?;
                state.reset_in_place(&op.qubits, rng)?;
            }
            GateKind::MeasureZ => {
                op.validate(state.n_qubits())?;
                bits.push(state.measure(op.qubits[0], rng)?);
            }
            _ => state.apply(op)?,
        }
    }
    Ok(bits)
}

/// Executes a unitary circuit on |0...0>.
pub fn execute_on_zero(n_qubits: usize, ops: &[GateOp]) -> Result<PureState> {
    let mut psi = PureState::zero(n_qubits);
    psi.apply_all(ops)?;
    Ok(psi)
}
