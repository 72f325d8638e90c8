//! Target generation, Mottonen state preparation and decoding of optimizer
//! parameter vectors into quantum states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{QsnapError, Result};
use crate::rng::RngStream;
use crate::simcore::linalg::polar_unitary;
use crate::simcore::{ry_in_basis, DensityMatrix, GateOp, PureState};
use crate::tolerance::TOL;

pub const MAX_RANDOM_QUBITS: usize = 10;

/// How an optimizer's real parameter vector is turned into a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    StateVector,
    DensityMatrix,
    Unitary,
}

impl Representation {
    /// Length of the real parameter vector for `n_qubits`.
    pub fn param_len(self, n_qubits: usize) -> usize {
        match self {
            Representation::StateVector => 2 << n_qubits,
            Representation::DensityMatrix | Representation::Unitary => 2 << (2 * n_qubits),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Representation::StateVector => "state_vector",
            Representation::DensityMatrix => "density_matrix",
            Representation::Unitary => "unitary",
        }
    }
}

impl std::str::FromStr for Representation {
    type Err = QsnapError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sv" | "statevector" | "state_vector" | "state-vector" => Ok(Representation::StateVector),
            "dm" | "density" | "densitymatrix" | "density_matrix" | "density-matrix" => {
                Ok(Representation::DensityMatrix)
            }
            "u" | "unitary" => Ok(Representation::Unitary),
            other => Err(QsnapError::Config(format!("unknown representation '{other}'"))),
        }
    }
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// The unknown state being reconstructed.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl TargetState {
    pub fn n_qubits(&self) -> usize {
        match self {
            TargetState::Pure(p) => p.n_qubits(),
            TargetState::Mixed(m) => m.n_qubits(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            TargetState::Pure(p) => DensityMatrix::from_pure(p),
            TargetState::Mixed(m) => m.clone(),
        }
    }

    pub fn as_pure(&self) -> Option<&PureState> {
        match self {
            TargetState::Pure(p) => Some(p),
            TargetState::Mixed(_) => None,
        }
    }
}

/// A target together with the seed that produced it.
///
/// Serialized as `{n_qubits, seed, re, im}`; for mixed targets `re`/`im`
/// hold the row-major matrix entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetSpecJson", into = "TargetSpecJson")]
pub struct TargetSpec {
    pub seed: Option<u64>,
    pub state: TargetState,
}

#[derive(Serialize, Deserialize)]
struct TargetSpecJson {
    n_qubits: usize,
    seed: Option<u64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<TargetSpecJson> for TargetSpec {
    type Error = QsnapError;

    fn try_from(j: TargetSpecJson) -> Result<Self> {
        if j.re.len() != j.im.len() {
            return Err(QsnapError::DimensionMismatch { expected: j.re.len(), got: j.im.len() });
        }
        let dim = 1usize << j.n_qubits;
        let entries: Vec<Complex64> = j.re.iter().zip(&j.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
        let state = if entries.len() == dim {
            TargetState::Pure(PureState::from_amplitudes(entries)?)
        } else if entries.len() == dim * dim {
            TargetState::Mixed(DensityMatrix::new(j.n_qubits, entries)?)
        } else {
            return Err(QsnapError::DimensionMismatch { expected: dim, got: entries.len() });
        };
        Ok(TargetSpec { seed: j.seed, state })
    }
}

impl From<TargetSpec> for TargetSpecJson {
    fn from(t: TargetSpec) -> Self {
        let n_qubits = t.n_qubits();
        let entries: Vec<Complex64> = match t.state {
            TargetState::Pure(p) => p.into_amplitudes(),
            TargetState::Mixed(m) => m.entries().to_vec(),
        };
        TargetSpecJson {
            n_qubits,
            seed: t.seed,
            re: entries.iter().map(|c| c.re).collect(),
            im: entries.iter().map(|c| c.im).collect(),
        }
    }
}

impl TargetSpec {
    pub fn pure(state: PureState, seed: Option<u64>) -> Self {
        TargetSpec { seed, state: TargetState::Pure(state) }
    }

    pub fn mixed(state: DensityMatrix, seed: Option<u64>) -> Self {
        TargetSpec { seed, state: TargetState::Mixed(state) }
    }

    /// Haar-random pure target drawn from a fresh stream seeded with `seed`.
    pub fn random(n_qubits: usize, seed: u64) -> Result<Self> {
        let mut rng = RngStream::new(seed);
        Ok(Self::pure(sample_random_state(n_qubits, &mut rng)?, Some(seed)))
    }

    pub fn n_qubits(&self) -> usize {
        self.state.n_qubits()
    }
}

fn gaussian_vec(len: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random pure state `(r + i s) / |r + i s|` with i.i.d. standard normal
/// `r` and `s` (Haar distributed).
pub fn sample_random_state(n_qubits: usize, rng: &mut RngStream) -> Result<PureState> {
    if !(1..=MAX_RANDOM_QUBITS).contains(&n_qubits) {
        return Err(QsnapError::InvalidParameter(format!(
            "qubit count {n_qubits} outside 1..={MAX_RANDOM_QUBITS}"
        )));
    }
    let dim = 1usize << n_qubits;
    let re = gaussian_vec(dim, rng);
    let im = gaussian_vec(dim, rng);
    PureState::from_parts(&re, &im)
}

/// Random full-rank mixed state `G G^dagger / Tr(G G^dagger)` with a
/// complex Ginibre matrix `G`.
pub fn sample_random_density(n_qubits: usize, rng: &mut RngStream) -> Result<DensityMatrix> {
    if !(1..=MAX_RANDOM_QUBITS).contains(&n_qubits) {
        return Err(QsnapError::InvalidParameter(format!(
            "qubit count {n_qubits} outside 1..={MAX_RANDOM_QUBITS}"
        )));
    }
    decode_density(&gaussian_vec(Representation::DensityMatrix.param_len(n_qubits), rng))
}

#[derive(Clone, Copy)]
enum Axis {
    Y,
    Z,
}

/// Uniformly controlled rotation on `target`, controlled by qubits
/// `0..target`. `angles[p]` is applied when the controls read `p` (qubit 0
/// most significant). Emitted with the Gray-code CNOT ladder.
fn uniformly_controlled(angles: &[f64], target: usize, axis: Axis) -> Vec<GateOp> {
    if angles.iter().all(|a| a.abs() < 1e-14) {
        return Vec::new();
    }
    let k = angles.len().trailing_zeros() as usize;
    debug_assert_eq!(k, target);
    let size = angles.len();
    let gray = |i: usize| i ^ (i >> 1);

    let mut ops = Vec::new();
    for i in 0..size {
        let g = gray(i);
        let theta: f64 = angles
            .iter()
            .enumerate()
            .map(|(p, a)| if (p & g).count_ones() % 2 == 0 { *a } else { -*a })
            .sum::<f64>()
            / size as f64;
        if theta.abs() > 1e-15 {
            match axis {
                Axis::Y => ops.extend(ry_in_basis(theta, target)),
                Axis::Z => ops.push(GateOp::rz(theta, target)),
            }
        }
        if k > 0 {
            let flipped = g ^ gray((i + 1) % size);
            let bit = flipped.trailing_zeros() as usize;
            ops.push(GateOp::cx(k - 1 - bit, target));
        }
    }
    ops
}

/// Mottonen preparation of `target` from |0...0>, in the basis
/// `{rz, sx, x, cx}`. Exact up to a global phase.
pub fn mottonen_circuit(target: &PureState) -> Result<Vec<GateOp>> {
    let norm = target.norm();
    if !(norm > TOL.degenerate_norm) {
        return Err(QsnapError::ZeroNorm(norm));
    }
    let n = target.n_qubits();
    let amps = target.amplitudes();
    let mags: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    let phases: Vec<f64> = amps
        .iter()
        .map(|a| if a.norm() > 1e-300 { a.arg() } else { 0.0 })
        .collect();

    let subtree = |level: usize, node: usize| -> std::ops::Range<usize> {
        let shift = n - level - 1;
        (node << shift)..((node + 1) << shift)
    };

    let mut ops = Vec::new();
    for level in 0..n {
        let angles: Vec<f64> = (0..1usize << level)
            .map(|p| {
                let w0: f64 = mags[subtree(level, 2 * p)].iter().sum();
                let w1: f64 = mags[subtree(level, 2 * p + 1)].iter().sum();
                2.0 * w1.sqrt().atan2(w0.sqrt())
            })
            .collect();
        ops.extend(uniformly_controlled(&angles, level, Axis::Y));
    }
    let mean = |r: std::ops::Range<usize>| {
        let len = r.len() as f64;
        phases[r].iter().sum::<f64>() / len
    };
    for level in 0..n {
        let angles: Vec<f64> = (0..1usize << level)
            .map(|p| mean(subtree(level, 2 * p + 1)) - mean(subtree(level, 2 * p)))
            .collect();
        ops.extend(uniformly_controlled(&angles, level, Axis::Z));
    }
    Ok(ops)
}

fn split_complex(w: &[f64], expected_len: usize) -> Result<Vec<Complex64>> {
    if w.len() != expected_len {
        return Err(QsnapError::DimensionMismatch { expected: expected_len, got: w.len() });
    }
    let half = w.len() / 2;
    Ok(w[..half].iter().zip(&w[half..]).map(|(&r, &i)| Complex64::new(r, i)).collect())
}

fn qubits_for_param_len(len: usize, repr: Representation) -> Result<usize> {
    (1..=MAX_RANDOM_QUBITS)
        .find(|&n| repr.param_len(n) == len)
        .ok_or_else(|| QsnapError::Shape(format!("parameter length {len} does not fit the {repr} representation")))
}

/// First half real parts, second half imaginary parts; normalized.
pub fn decode_statevector(w: &[f64]) -> Result<PureState> {
    let n = qubits_for_param_len(w.len(), Representation::StateVector)?;
    let amps = split_complex(w, Representation::StateVector.param_len(n))?;
    PureState::normalized(amps).map_err(|e| match e {
        QsnapError::ZeroNorm(x) => QsnapError::DegenerateCandidate(format!("parameter norm {x:e}")),
        other => other,
    })
}

/// Inverse of [`decode_statevector`] for a normalized state.
pub fn encode_statevector(psi: &PureState) -> Vec<f64> {
    let mut w = psi.real_parts();
    w.extend(psi.imag_parts());
    w
}

fn square_from_params(w: &[f64], repr: Representation) -> Result<(usize, DMatrix<Complex64>)> {
    let n = qubits_for_param_len(w.len(), repr)?;
    let entries = split_complex(w, repr.param_len(n))?;
    let d = 1usize << n;
    Ok((n, DMatrix::from_row_slice(d, d, &entries)))
}

/// Row-major complex matrix -> nearest unitary (polar factor) -> first column.
pub fn decode_unitary(w: &[f64]) -> Result<PureState> {
    let (n, m) = square_from_params(w, Representation::Unitary)?;
    let u = polar_unitary(&m)?;
    let col: Vec<Complex64> = u.column(0).iter().copied().collect();
    // The column of a unitary is unit norm up to round-off.
    let norm = crate::simcore::PureState::normalized(col)?;
    debug_assert_eq!(norm.n_qubits(), n);
    Ok(norm)
}

/// Inverse of [`decode_unitary`] for a matrix given row-major.
pub fn encode_matrix(entries: &[Complex64]) -> Vec<f64> {
    let mut w: Vec<f64> = entries.iter().map(|c| c.re).collect();
    w.extend(entries.iter().map(|c| c.im));
    w
}

/// Row-major complex factor `L` -> `L L^dagger / Tr(L L^dagger)`.
pub fn decode_density(w: &[f64]) -> Result<DensityMatrix> {
    let (n, l) = square_from_params(w, Representation::DensityMatrix)?;
    let mut rho = &l * l.adjoint();
    let tr: f64 = (0..rho.nrows()).map(|i| rho[(i, i)].re).sum();
    if !(tr > TOL.degenerate_norm) {
        return Err(QsnapError::DegenerateCandidate(format!("factor has trace {tr:e}")));
    }
    rho.iter_mut().for_each(|x| *x /= tr);
    // Exact Hermiticity after round-off.
    let rho = (&rho + rho.adjoint()).map(|x| x * 0.5);
    Ok(DensityMatrix::from_matrix_unchecked(n, &rho))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use proptest::prelude::*;

    use super::*;
    use crate::simcore::execute_on_zero;

    fn fidelity(a: &PureState, b: &PureState) -> f64 {
        a.inner(b).unwrap().norm_sqr()
    }

    #[test]
    fn random_states_are_normalized_and_reproducible() {
        for seed in 0..20 {
            let mut rng = RngStream::new(seed);
            let psi = sample_random_state(3, &mut rng).unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-12);
        }
        let a = sample_random_state(1, &mut RngStream::new(42)).unwrap();
        let b = sample_random_state(1, &mut RngStream::new(42)).unwrap();
        assert_eq!(a, b);
        assert!(sample_random_state(0, &mut RngStream::new(1)).is_err());
        assert!(sample_random_state(11, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn random_state_populations_are_uniform_on_average() {
        let mut rng = RngStream::new(7);
        let mut sums = [0.0; 4];
        for _ in 0..1000 {
            let psi = sample_random_state(2, &mut rng).unwrap();
            for (s, p) in sums.iter_mut().zip(psi.probabilities()) {
                *s += p;
            }
        }
        for s in sums {
            assert!((s / 1000.0 - 0.25).abs() <= 0.02, "mean population {}", s / 1000.0);
        }
    }

    #[test]
    fn mottonen_zero_state_is_empty() {
        let ops = mottonen_circuit(&PureState::zero(3)).unwrap();
        assert!(ops.is_empty());
    }

    #[test]
    fn mottonen_plus_state() {
        let plus = PureState::from_parts(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &[0.0, 0.0]).unwrap();
        let out = execute_on_zero(1, &mottonen_circuit(&plus).unwrap()).unwrap();
        // Align the global phase, then compare elementwise.
        let phase = out.inner(&plus).unwrap();
        let aligned = out.with_global_phase(phase / phase.norm());
        for (a, b) in aligned.amplitudes().iter().zip(plus.amplitudes()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn mottonen_emits_only_basis_gates() {
        let mut rng = RngStream::new(4);
        let psi = sample_random_state(4, &mut rng).unwrap();
        assert!(mottonen_circuit(&psi).unwrap().iter().all(|g| g.kind.is_basis()));
    }

    #[test]
    fn mottonen_random_three_qubit_targets() {
        let mut rng = RngStream::new(2025);
        for _ in 0..100 {
            let psi = sample_random_state(3, &mut rng).unwrap();
            let out = execute_on_zero(3, &mottonen_circuit(&psi).unwrap()).unwrap();
            assert!(fidelity(&out, &psi) >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn mottonen_handles_sparse_targets() {
        // |01> + |10> has zero-amplitude branches at every level.
        let s = FRAC_1_SQRT_2;
        let psi = PureState::from_parts(&[0.0, s, 0.0, 0.0], &[0.0, 0.0, s, 0.0]).unwrap();
        let out = execute_on_zero(2, &mottonen_circuit(&psi).unwrap()).unwrap();
        assert!(fidelity(&out, &psi) >= 1.0 - 1e-12);
    }

    #[test]
    fn decode_statevector_examples() {
        assert_eq!(decode_statevector(&[1.0, 0.0, 0.0, 0.0]).unwrap(), PureState::zero(1));
        let plus = decode_statevector(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((plus.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        let i0 = decode_statevector(&[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((fidelity(&i0, &PureState::zero(1)) - 1.0).abs() < 1e-15);
        assert!(matches!(
            decode_statevector(&[0.0; 4]),
            Err(QsnapError::DegenerateCandidate(_))
        ));
        assert!(decode_statevector(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn decode_unitary_examples() {
        let id = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(decode_unitary(&id).unwrap().amplitudes()[0], Complex64::new(1.0, 0.0));

        let h = 2.0 * FRAC_1_SQRT_2;
        let out = decode_unitary(&[h, h, h, -h, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((out.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((out.amplitudes()[1].re - FRAC_1_SQRT_2).abs() < 1e-12);

        assert!(matches!(decode_unitary(&[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]), Err(QsnapError::Singular(_))));
    }

    #[test]
    fn polar_projection_is_unitary() {
        let mut rng = RngStream::new(12);
        for _ in 0..10 {
            let w = gaussian_vec(Representation::Unitary.param_len(2), &mut rng);
            let (_, m) = square_from_params(&w, Representation::Unitary).unwrap();
            let u = polar_unitary(&m).unwrap();
            let gram = u.adjoint() * &u;
            for i in 0..4 {
                for j in 0..4 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn polar_projection_is_idempotent_on_unitaries() {
        let mut rng = RngStream::new(13);
        let w = gaussian_vec(Representation::Unitary.param_len(2), &mut rng);
        let (_, m) = square_from_params(&w, Representation::Unitary).unwrap();
        let u = polar_unitary(&m).unwrap();
        let row_major: Vec<Complex64> = (0..4).flat_map(|r| (0..4).map(move |c| (r, c))).map(|(r, c)| u[(r, c)]).collect();
        let decoded = decode_unitary(&encode_matrix(&row_major)).unwrap();
        for (i, a) in decoded.amplitudes().iter().enumerate() {
            assert!((a - u[(i, 0)]).norm() < 1e-12);
        }
    }

    #[test]
    fn decode_density_examples() {
        let id = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let rho = decode_density(&id).unwrap();
        assert!(rho.max_abs_diff(&DensityMatrix::maximally_mixed(1)) < 1e-15);

        let proj = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(decode_density(&proj).unwrap().max_abs_diff(&DensityMatrix::zero_state(1)) < 1e-15);

        let mut rng = RngStream::new(14);
        for _ in 0..20 {
            let rho = decode_density(&gaussian_vec(32, &mut rng)).unwrap();
            assert!(rho.eigenvalues()[0] >= -1e-12);
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            rho.check().unwrap();
        }
        assert!(decode_density(&[0.0; 8]).is_err());
    }

    #[test]
    fn target_spec_json_round_trip_is_bit_exact() {
        let spec = TargetSpec::random(3, 99).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: TargetSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["n_qubits"], 3);
        assert_eq!(json["seed"], 99);
        assert_eq!(json["re"].as_array().unwrap().len(), 8);

        let mixed = TargetSpec::mixed(sample_random_density(2, &mut RngStream::new(1)).unwrap(), None);
        let back: TargetSpec = serde_json::from_str(&serde_json::to_string(&mixed).unwrap()).unwrap();
        assert_eq!(back, mixed);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decoded_statevectors_are_normalized(w in prop::collection::vec(-5.0f64..5.0, 8)) {
            prop_assume!(w.iter().map(|x| x * x).sum::<f64>() > 1e-6);
            let psi = decode_statevector(&w).unwrap();
            prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn decoding_ignores_global_phase(seed in any::<u64>(), angle in -3.2f64..3.2) {
            let mut rng = RngStream::new(seed);
            let w = gaussian_vec(8, &mut rng);
            let phase = Complex64::from_polar(1.0, angle);
            let rotated: Vec<Complex64> = split_complex(&w, 8).unwrap().iter().map(|z| z * phase).collect();
            let a = decode_statevector(&w).unwrap();
            let b = decode_statevector(&encode_matrix(&rotated)).unwrap();
            prop_assert!((fidelity(&a, &b) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn mottonen_round_trip(seed in any::<u64>(), n in 1usize..=6) {
            let mut rng = RngStream::new(seed);
            let psi = sample_random_state(n, &mut rng).unwrap();
            let out = execute_on_zero(n, &mottonen_circuit(&psi).unwrap()).unwrap();
            prop_assert!(fidelity(&out, &psi) >= 1.0 - 1e-9);
        }
    }
}
