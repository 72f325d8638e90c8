//! Entropies and mixed-state distance measures.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QsnapError, Result};
use crate::simcore::linalg::{hermitian_eigen, hermitian_eigenvalues};
use crate::simcore::{DensityMatrix, PureState};
use crate::tolerance::TOL;

/// Logarithm base for entropies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyUnits {
    #[default]
    Bits,
    Nats,
}

impl EntropyUnits {
    pub fn label(self) -> &'static str {
        match self {
            EntropyUnits::Bits => "bits",
            EntropyUnits::Nats => "nats",
        }
    }

    fn log(self, x: f64) -> f64 {
        match self {
            EntropyUnits::Bits => x.log2(),
            EntropyUnits::Nats => x.ln(),
        }
    }
}

fn check_dims(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(QsnapError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

fn spectrum_entropy(eigs: &[f64], units: EntropyUnits) -> Result<f64> {
    if let Some(&min) = eigs.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < -TOL.psd_slack {
            return Err(QsnapError::NotPositive(min));
        }
    }
    let s: f64 = eigs.iter().filter(|&&l| l > 0.0).map(|&l| -l * units.log(l)).sum();
    Ok(s.max(0.0))
}

/// `-sum lambda log2 lambda`, with `0 log 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    von_neumann_entropy_in(rho, EntropyUnits::Bits)
}

pub fn von_neumann_entropy_in(rho: &DensityMatrix, units: EntropyUnits) -> Result<f64> {
    spectrum_entropy(&rho.eigenvalues(), units)
}

/// Reduced density matrix of `psi` on `partition`, built as `M M^dagger`
/// from the amplitude matrix `M[a, b]` (kept index `a`, traced index `b`).
pub fn reduced_state(psi: &PureState, partition: &[usize]) -> Result<DensityMatrix> {
    let n = psi.n_qubits();
    for (i, &q) in partition.iter().enumerate() {
        if q >= n {
            return Err(QsnapError::IndexOutOfRange { index: q, n_qubits: n });
        }
        if partition[..i].contains(&q) {
            return Err(QsnapError::DuplicateQubit(q));
        }
    }
    if partition.is_empty() {
        return Err(QsnapError::InvalidParameter("partition must be nonempty".into()));
    }
    let rest: Vec<usize> = (0..n).filter(|q| !partition.contains(q)).collect();
    let bits = |idx: usize, qs: &[usize]| qs.iter().fold(0usize, |acc, &q| (acc << 1) | ((idx >> (n - 1 - q)) & 1));
    let (da, db) = (1usize << partition.len(), 1usize << rest.len());
    let mut m = DMatrix::<Complex64>::zeros(da, db);
    for (idx, amp) in psi.amplitudes().iter().enumerate() {
        m[(bits(idx, partition), bits(idx, &rest))] = *amp;
    }
    Ok(DensityMatrix::from_matrix_unchecked(partition.len(), &(&m * m.adjoint())))
}

/// Entanglement entropy (bits) of `psi` across `partition | complement`.
pub fn bipartite_entropy(psi: &PureState, partition: &[usize]) -> Result<f64> {
    bipartite_entropy_in(psi, partition, EntropyUnits::Bits)
}

pub fn bipartite_entropy_in(psi: &PureState, partition: &[usize], units: EntropyUnits) -> Result<f64> {
    if partition.len() >= psi.n_qubits() {
        return Err(QsnapError::InvalidParameter("partition must be a proper subset".into()));
    }
    von_neumann_entropy_in(&reduced_state(psi, partition)?, units)
}

/// Eigenvalues below this fraction of the largest are treated as zero;
/// their square roots would otherwise inject `~1e-8` noise.
const SPECTRAL_CUTOFF: f64 = 1e-13;

fn support(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let (vals, vecs) = hermitian_eigen(m);
    let top = vals.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > SPECTRAL_CUTOFF * top).collect();
    let cols: Vec<_> = keep.iter().map(|&i| vecs.column(i).into_owned()).collect();
    let basis = if cols.is_empty() { DMatrix::zeros(m.nrows(), 0) } else { DMatrix::from_columns(&cols) };
    (keep.iter().map(|&i| vals[i]).collect(), basis)
}

/// `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, clamped to `[0, 1]`.
///
/// Evaluated on the support of the lower-rank argument: with
/// `rho = V L V^dagger`, the spectrum of `sqrt(rho) sigma sqrt(rho)` equals that
/// of `sqrt(L) V^dagger sigma V sqrt(L)`. Pure inputs are therefore exact.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let (a, b) = (rho.to_matrix(), sigma.to_matrix());
    let (sa, sb) = (support(&a), support(&b));
    let ((vals, basis), other) = if sa.0.len() <= sb.0.len() { (sa, &b) } else { (sb, &a) };
    if vals.is_empty() {
        return Ok(0.0);
    }
    let root = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|l| Complex64::new(l.sqrt(), 0.0)),
    ));
    let inner = &root * basis.adjoint() * other * &basis * &root;
    let spec = hermitian_eigenvalues(&inner);
    let top = spec.iter().copied().fold(0.0, f64::max);
    let root_trace: f64 = spec.iter().filter(|&&l| l > SPECTRAL_CUTOFF * top).map(|l| l.sqrt()).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// `Tr|rho - sigma|`.
fn trace_norm_of_difference(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let diff = rho.to_matrix() - sigma.to_matrix();
    Ok(hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum())
}

/// `(1/2) Tr|rho - sigma|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok((0.5 * trace_norm_of_difference(rho, sigma)?).clamp(0.0, 1.0))
}

/// Two readings of the optimal discrimination probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelstromSuccess {
    /// `1 - (1/2) Tr|rho - sigma|`, the printed form found in the state-reconstruction
    /// literature; it decreases with distinguishability.
    pub printed: f64,
    /// `1/2 + (1/4) Tr|rho - sigma|`, the equal-prior Helstrom bound.
    pub textbook: f64,
}

pub fn helstrom_success(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<HelstromSuccess> {
    let t = trace_norm_of_difference(rho, sigma)?;
    Ok(HelstromSuccess { printed: 1.0 - 0.5 * t, textbook: 0.5 + 0.25 * t })
}

/// Upper bound on the success probability of discriminating two states with
/// a single SWAP test.
pub fn swap_discrimination_bound() -> f64 {
    0.75
}

/// True when a SWAP-based discrimination claim exceeds the bound.
pub fn exceeds_swap_bound(claimed_success: f64) -> bool {
    claimed_success > swap_discrimination_bound()
}

/// Success probability of guessing "same" on ancilla 0 and "different" on
/// ancilla 1 with equal priors, for SWAP-testing `rho` against a copy of
/// itself versus against `sigma`: `1/2 + (1 - Tr(rho sigma))/4` when the
/// same-pair purity is 1.
pub fn swap_discrimination_success(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let p_same = 0.5 * (1.0 + rho.hs_inner(rho)?);
    let p_diff_one = 0.5 * (1.0 - rho.hs_inner(sigma)?);
    Ok(0.5 * p_same + 0.5 * p_diff_one)
}

/// Side-by-side mixed-state comparison annotated against the SWAP bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStateReport {
    pub hilbert_schmidt: f64,
    pub uhlmann: f64,
    pub trace_distance: f64,
    pub helstrom: HelstromSuccess,
    pub swap_discrimination: f64,
    pub swap_bound: f64,
    pub exceeds_swap_bound: bool,
    pub annotation: String,
}

pub fn mixed_state_report(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<MixedStateReport> {
    let hs = rho.hs_inner(sigma)?;
    let uhlmann = uhlmann_fidelity(rho, sigma)?;
    let td = trace_distance(rho, sigma)?;
    let helstrom = helstrom_success(rho, sigma)?;
    let swap = swap_discrimination_success(rho, sigma)?;
    let bound = swap_discrimination_bound();
    let annotation = format!(
        "SWAP test estimates Tr(rho sigma) = {hs:.6}; Uhlmann fidelity = {uhlmann:.6}; \
         SWAP-based discrimination succeeds with p = {swap:.6} <= {bound} \
         (Helstrom: {:.6} textbook, {:.6} printed form)",
        helstrom.textbook, helstrom.printed
    );
    Ok(MixedStateReport {
        hilbert_schmidt: hs,
        uhlmann,
        trace_distance: td,
        helstrom,
        swap_discrimination: swap,
        swap_bound: bound,
        exceeds_swap_bound: exceeds_swap_bound(swap),
        annotation,
    })
}

/// Target vs reconstructed entanglement entropy for one circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub circuit_id: String,
    pub n_qubits: usize,
    pub partition: Vec<usize>,
    pub target_entropy: f64,
    pub reconstructed_entropy: f64,
    pub units: EntropyUnits,
}

impl EntropyReport {
    pub fn new(circuit_id: impl Into<String>, target: &PureState, reconstructed: &PureState, partition: &[usize]) -> Result<Self> {
        Self::new_in(circuit_id, target, reconstructed, partition, EntropyUnits::Bits)
    }

    pub fn new_in(
        circuit_id: impl Into<String>,
        target: &PureState,
        reconstructed: &PureState,
        partition: &[usize],
        units: EntropyUnits,
    ) -> Result<Self> {
        if target.n_qubits() != reconstructed.n_qubits() {
            return Err(QsnapError::DimensionMismatch { expected: target.n_qubits(), got: reconstructed.n_qubits() });
        }
        Ok(EntropyReport {
            circuit_id: circuit_id.into(),
            n_qubits: target.n_qubits(),
            partition: partition.to_vec(),
            target_entropy: bipartite_entropy_in(target, partition, units)?,
            reconstructed_entropy: bipartite_entropy_in(reconstructed, partition, units)?,
            units,
        })
    }

    pub fn delta(&self) -> f64 {
        (self.target_entropy - self.reconstructed_entropy).abs()
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use proptest::prelude::*;

    use super::*;
    use crate::rng::RngStream;
    use crate::simcore::{partial_trace, tensor};
    use crate::stateprep::{sample_random_density, sample_random_state};
    use crate::swaptest::{fidelity_oracle, swap_test_mixed_exact};

    fn bell() -> PureState {
        let h = FRAC_1_SQRT_2;
        PureState::from_parts(&[h, 0.0, 0.0, h], &[0.0; 4]).unwrap()
    }

    fn ghz(n: usize) -> PureState {
        let mut re = vec![0.0; 1 << n];
        re[0] = FRAC_1_SQRT_2;
        re[(1 << n) - 1] = FRAC_1_SQRT_2;
        PureState::from_parts(&re, &vec![0.0; 1 << n]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let mut rng = RngStream::new(1);
        let pure = DensityMatrix::from_pure(&sample_random_state(2, &mut rng).unwrap());
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-9);
        assert!((von_neumann_entropy(&DensityMatrix::maximally_mixed(1)).unwrap() - 1.0).abs() < 1e-12);
        assert!((von_neumann_entropy(&DensityMatrix::maximally_mixed(2)).unwrap() - 2.0).abs() < 1e-12);
        let nats = von_neumann_entropy_in(&DensityMatrix::maximally_mixed(1), EntropyUnits::Nats).unwrap();
        assert!((nats - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bipartite_examples() {
        assert!((bipartite_entropy(&bell(), &[0]).unwrap() - 1.0).abs() < 1e-9);
        assert!((bipartite_entropy(&bell(), &[1]).unwrap() - 1.0).abs() < 1e-9);
        let mut rng = RngStream::new(2);
        let prod = tensor(&sample_random_state(1, &mut rng).unwrap(), &sample_random_state(2, &mut rng).unwrap());
        assert!(bipartite_entropy(&prod, &[0]).unwrap().abs() < 1e-9);
        for q in 0..3 {
            assert!((bipartite_entropy(&ghz(3), &[q]).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(bipartite_entropy(&bell(), &[]).is_err());
        assert!(bipartite_entropy(&bell(), &[0, 1]).is_err());
    }

    #[test]
    fn reduced_state_matches_partial_trace() {
        let mut rng = RngStream::new(3);
        let psi = sample_random_state(4, &mut rng).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        for keep in [vec![0], vec![2, 1], vec![0, 3], vec![1, 2, 3]] {
            let a = reduced_state(&psi, &keep).unwrap();
            let b = partial_trace(&rho, &keep).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }

    #[test]
    fn uhlmann_examples() {
        let mut rng = RngStream::new(4);
        let rho = sample_random_density(2, &mut rng).unwrap();
        assert!((uhlmann_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);
        let plus = PureState::from_parts(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &[0.0, 0.0]).unwrap();
        let f = uhlmann_fidelity(&DensityMatrix::zero_state(1), &DensityMatrix::from_pure(&plus)).unwrap();
        assert!((f - 0.5).abs() < 1e-10);
        let mm = DensityMatrix::maximally_mixed(1);
        assert!((uhlmann_fidelity(&mm, &mm).unwrap() - 1.0).abs() < 1e-12);
        assert!((swap_test_mixed_exact(&mm, &mm).unwrap() - 0.5).abs() < 1e-12);
        assert!(uhlmann_fidelity(&mm, &DensityMatrix::maximally_mixed(2)).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let z = DensityMatrix::zero_state(1);
        let o = DensityMatrix::from_pure(&PureState::basis(1, 1));
        let mm = DensityMatrix::maximally_mixed(1);
        assert!(trace_distance(&z, &z).unwrap().abs() < 1e-15);
        assert!((trace_distance(&z, &o).unwrap() - 1.0).abs() < 1e-15);
        assert!((trace_distance(&z, &mm).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn helstrom_examples() {
        let z = DensityMatrix::zero_state(1);
        let o = DensityMatrix::from_pure(&PureState::basis(1, 1));
        let mm = DensityMatrix::maximally_mixed(1);
        let same = helstrom_success(&z, &z).unwrap();
        assert!((same.printed - 1.0).abs() < 1e-15 && (same.textbook - 0.5).abs() < 1e-15);
        let orth = helstrom_success(&z, &o).unwrap();
        assert!(orth.printed.abs() < 1e-15 && (orth.textbook - 1.0).abs() < 1e-15);
        let half = helstrom_success(&z, &mm).unwrap();
        assert!((half.printed - 0.5).abs() < 1e-15 && (half.textbook - 0.75).abs() < 1e-15);
    }

    #[test]
    fn swap_bound_annotation() {
        assert_eq!(swap_discrimination_bound(), 0.75);
        assert!(exceeds_swap_bound(0.8));
        assert!(!exceeds_swap_bound(0.75));
        let z = DensityMatrix::zero_state(1);
        let o = DensityMatrix::from_pure(&PureState::basis(1, 1));
        let report = mixed_state_report(&z, &o).unwrap();
        // Orthogonal pure states reach the bound exactly.
        assert!((report.swap_discrimination - 0.75).abs() < 1e-15);
        assert!(!report.exceeds_swap_bound);
        assert!(report.annotation.contains("0.75"));
    }

    #[test]
    fn entropy_report_examples() {
        let mut rng = RngStream::new(5);
        let prod = tensor(&sample_random_state(1, &mut rng).unwrap(), &sample_random_state(1, &mut rng).unwrap());
        let r = EntropyReport::new("prod", &prod, &prod, &[0]).unwrap();
        assert!(r.target_entropy.abs() < 1e-9 && r.reconstructed_entropy.abs() < 1e-9);
        let r = EntropyReport::new("bell", &bell(), &bell(), &[0]).unwrap();
        assert!((r.target_entropy - 1.0).abs() < 1e-9 && r.delta() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn pure_state_symmetry(seed in any::<u64>(), n in 2usize..=4, mask in 1u32..15) {
            let mut rng = RngStream::new(seed);
            let psi = sample_random_state(n, &mut rng).unwrap();
            let a: Vec<usize> = (0..n).filter(|q| mask & (1 << q) != 0).collect();
            let b: Vec<usize> = (0..n).filter(|q| mask & (1 << q) == 0).collect();
            prop_assume!(!a.is_empty() && !b.is_empty());
            let sa = bipartite_entropy(&psi, &a).unwrap();
            let sb = bipartite_entropy(&psi, &b).unwrap();
            prop_assert!((sa - sb).abs() < 1e-9);
            prop_assert!(sa >= 0.0 && sa <= a.len().min(b.len()) as f64 + 1e-9);
        }

        #[test]
        fn uhlmann_reduces_to_oracle(seed in any::<u64>(), n in 1usize..=3) {
            let mut rng = RngStream::new(seed);
            let a = sample_random_state(n, &mut rng).unwrap();
            let b = sample_random_state(n, &mut rng).unwrap();
            let u = uhlmann_fidelity(&DensityMatrix::from_pure(&a), &DensityMatrix::from_pure(&b)).unwrap();
            prop_assert!((u - fidelity_oracle(&a, &b).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn fuchs_van_de_graaf(seed in any::<u64>(), n in 1usize..=2) {
            let mut rng = RngStream::new(seed);
            let r = sample_random_density(n, &mut rng).unwrap();
            let s = sample_random_density(n, &mut rng).unwrap();
            let f = uhlmann_fidelity(&r, &s).unwrap();
            let t = trace_distance(&r, &s).unwrap();
            prop_assert!(1.0 - f.sqrt() <= t + 1e-8);
            prop_assert!(t <= (1.0 - f).sqrt() + 1e-8);
        }

        #[test]
        fn entropy_is_additive(seed in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let a = sample_random_density(1, &mut rng).unwrap();
            let b = sample_random_density(2, &mut rng).unwrap();
            let joint = von_neumann_entropy(&a.tensor(&b)).unwrap();
            let sum = von_neumann_entropy(&a).unwrap() + von_neumann_entropy(&b).unwrap();
            prop_assert!((joint - sum).abs() < 1e-9);
        }
    }
}
