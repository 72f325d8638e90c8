//! The SWAP test: the only feedback channel between the unknown state and
//! the classical optimizer.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QsnapError, Result};
use crate::noise::{NoiseModel, NoiseModelSpec};
use crate::rng::RngStream;
use crate::simcore::{tensor, DensityMatrix, GateOp, PureState, Register};
use crate::stateprep::{mottonen_circuit, TargetSpec, TargetState};
use crate::tolerance::DEFAULT_MAX_DM_QUBITS;

/// How an outcome was estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Exact,
    Sampled { shots: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapTestOutcome {
    /// `2 p0 - 1`.
    pub fidelity_estimate: f64,
    pub mode: EstimateKind,
    pub noisy: bool,
    /// Probability (or observed frequency) of the ancilla reading 0.
    pub p0: f64,
}

impl SwapTestOutcome {
    fn from_p0(p0: f64, mode: EstimateKind, noisy: bool) -> Self {
        SwapTestOutcome { fidelity_estimate: 2.0 * p0 - 1.0, mode, noisy, p0 }
    }
}

/// Ancilla on qubit 0, target on `1..=n`, candidate on `n+1..=2n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    pub n: usize,
}

impl RegisterLayout {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(QsnapError::InvalidParameter("SWAP test needs at least one qubit per register".into()));
        }
        Ok(RegisterLayout { n })
    }

    pub const ANCILLA: usize = 0;

    pub fn ancilla(&self) -> usize {
        Self::ANCILLA
    }

    pub fn target(&self) -> std::ops::Range<usize> {
        1..1 + self.n
    }

    pub fn candidate(&self) -> std::ops::Range<usize> {
        1 + self.n..1 + 2 * self.n
    }

    pub fn total_qubits(&self) -> usize {
        2 * self.n + 1
    }

    /// `H(anc)`, controlled-SWAP of each (target_k, candidate_k), `H(anc)`.
    pub fn interferometer(&self) -> Vec<GateOp> {
        let mut ops = vec![GateOp::h(self.ancilla())];
        ops.extend(self.target().zip(self.candidate()).map(|(t, c)| GateOp::cswap(self.ancilla(), t, c)));
        ops.push(GateOp::h(self.ancilla()));
        ops
    }

    /// Preparation of `target` and `candidate` on their registers from |0>.
    pub fn preparation(&self, target: &PureState, candidate: &PureState) -> Result<Vec<GateOp>> {
        let mut ops = shift(&mottonen_circuit(target)?, self.target().start);
        ops.extend(shift(&mottonen_circuit(candidate)?, self.candidate().start));
        Ok(ops)
    }
}

fn shift(ops: &[GateOp], offset: usize) -> Vec<GateOp> {
    ops.iter()
        .map(|g| GateOp { kind: g.kind, qubits: g.qubits.iter().map(|q| q + offset).collect() })
        .collect()
}

fn check_same_size(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(QsnapError::DimensionMismatch { expected: a, got: b });
    }
    Ok(())
}

/// `|<psi|phi>|^2`, computed classically.
pub fn fidelity_oracle(psi: &PureState, phi: &PureState) -> Result<f64> {
    check_same_size(psi.n_qubits(), phi.n_qubits())?;
    Ok(psi.inner(phi)?.norm_sqr())
}

fn exact_p0(psi: &PureState, phi: &PureState) -> Result<f64> {
    check_same_size(psi.n_qubits(), phi.n_qubits())?;
    let layout = RegisterLayout::new(psi.n_qubits())?;
    let mut state = tensor(&tensor(&PureState::zero(1), psi), phi);
    state.apply_all(&layout.interferometer())?;
    Ok(1.0 - state.prob_one(layout.ancilla())?)
}

/// Simulates the SWAP-test circuit and reads the ancilla's exact `<Z>`.
pub fn swap_test_exact(psi: &PureState, phi: &PureState) -> Result<SwapTestOutcome> {
    Ok(SwapTestOutcome::from_p0(exact_p0(psi, phi)?, EstimateKind::Exact, false))
}

fn draw_zeros(p0: f64, shots: u64, rng: &mut RngStream) -> Result<u64> {
    if shots == 0 {
        return Err(QsnapError::InvalidParameter("shots must be at least 1".into()));
    }
    let dist = Binomial::new(shots, p0.clamp(0.0, 1.0))
        .map_err(|e| QsnapError::InvalidParameter(format!("binomial draw: {e}")))?;
    Ok(dist.sample(rng))
}

/// Noisy SWAP test with target and candidate loaded by their Mottonen
/// circuits, every basis gate carrying its channel.
#[derive(Debug, Clone)]
pub struct NoisySwapTest {
    model: NoiseModel,
    layout: RegisterLayout,
    target_prep: Vec<GateOp>,
    max_dm_qubits: usize,
}

impl NoisySwapTest {
    pub fn new(target: &PureState, noise: &NoiseModelSpec) -> Result<Self> {
        let layout = RegisterLayout::new(target.n_qubits())?;
        Ok(NoisySwapTest {
            model: NoiseModel::new(noise)?,
            layout,
            target_prep: shift(&mottonen_circuit(target)?, layout.target().start),
            max_dm_qubits: DEFAULT_MAX_DM_QUBITS,
        })
    }

    pub fn with_max_dm_qubits(mut self, cap: usize) -> Self {
        self.max_dm_qubits = cap;
        self
    }

    pub fn layout(&self) -> RegisterLayout {
        self.layout
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn uses_density_matrix(&self) -> bool {
        self.layout.total_qubits() <= self.max_dm_qubits
    }

    fn circuit(&self, candidate: &PureState) -> Result<Vec<GateOp>> {
        check_same_size(self.layout.n, candidate.n_qubits())?;
        let mut ops = self.target_prep.clone();
        ops.extend(shift(&mottonen_circuit(candidate)?, self.layout.candidate().start));
        ops.extend(self.layout.interferometer());
        Ok(ops)
    }

    /// Exact noisy `P(ancilla reads 0)` including the readout flip, from the
    /// density-matrix path.
    pub fn exact_p0(&self, candidate: &PureState) -> Result<f64> {
        let total = self.layout.total_qubits();
        if total > self.max_dm_qubits {
            return Err(QsnapError::TooManyQubits { requested: total, cap: self.max_dm_qubits });
        }
        let mut rho = DensityMatrix::zero_state(total);
        self.model.run_dm(&mut rho, &self.circuit(candidate)?)?;
        Ok(self.model.observed_p0(1.0 - rho.prob_one(self.layout.ancilla())?))
    }

    pub fn exact(&self, candidate: &PureState) -> Result<SwapTestOutcome> {
        Ok(SwapTestOutcome::from_p0(self.exact_p0(candidate)?, EstimateKind::Exact, true))
    }

    /// Shot-sampled estimate. Uses the density-matrix probability when the
    /// circuit fits under the cap, otherwise one noisy trajectory per shot.
    pub fn sampled(&self, candidate: &PureState, shots: u64, rng: &mut RngStream) -> Result<SwapTestOutcome> {
        let zeros = if self.uses_density_matrix() {
            draw_zeros(self.exact_p0(candidate)?, shots, rng)?
        } else {
            if shots == 0 {
                return Err(QsnapError::InvalidParameter("shots must be at least 1".into()));
            }
            let mut ops = self.circuit(candidate)?;
            ops.push(GateOp::measure(self.layout.ancilla()));
            let mut zeros = 0;
            for _ in 0..shots {
                let mut psi = PureState::zero(self.layout.total_qubits());
                let bits = self.model.run_trajectory(&mut psi, &ops, rng)?;
                zeros += u64::from(bits[0] == 0);
            }
            zeros
        };
        Ok(SwapTestOutcome::from_p0(zeros as f64 / shots as f64, EstimateKind::Sampled { shots }, true))
    }
}

/// Shot-sampled SWAP test, optionally under a noise model.
pub fn swap_test_sampled(
    psi: &PureState,
    phi: &PureState,
    shots: u64,
    noise: Option<&NoiseModelSpec>,
    rng: &mut RngStream,
) -> Result<SwapTestOutcome> {
    match noise {
        None => {
            let zeros = draw_zeros(exact_p0(psi, phi)?, shots, rng)?;
            Ok(SwapTestOutcome::from_p0(zeros as f64 / shots as f64, EstimateKind::Sampled { shots }, false))
        }
        Some(spec) => NoisySwapTest::new(psi, spec)?.sampled(phi, shots, rng),
    }
}

/// Exact noisy estimate via the density-matrix path (`2n + 1 <= 9`).
pub fn swap_test_noisy_exact(psi: &PureState, phi: &PureState, noise: &NoiseModelSpec) -> Result<SwapTestOutcome> {
    NoisySwapTest::new(psi, noise)?.exact(phi)
}

/// `Tr(rho sigma)`: what the SWAP test measures on mixed inputs.
pub fn swap_test_mixed_exact(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_size(rho.dim(), sigma.dim())?;
    rho.hs_inner(sigma)
}

/// Runs the interferometer on `|0><0| (x) rho (x) sigma` and reads `<Z>`.
pub fn swap_test_mixed_circuit(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_size(rho.dim(), sigma.dim())?;
    let layout = RegisterLayout::new(rho.n_qubits())?;
    if layout.total_qubits() > DEFAULT_MAX_DM_QUBITS {
        return Err(QsnapError::TooManyQubits { requested: layout.total_qubits(), cap: DEFAULT_MAX_DM_QUBITS });
    }
    let mut full = DensityMatrix::zero_state(1).tensor(rho).tensor(sigma);
    full.apply_all(&layout.interferometer())?;
    full.expectation_z(layout.ancilla())
}

/// How each snapshot iteration reads the ancilla.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotReadout {
    /// Exact `<Z>`, then the interferometer is run again (it is its own
    /// inverse) so the target register is returned untouched.
    #[default]
    Coherent,
    /// One projective ancilla measurement per iteration; the estimate is
    /// `+1` or `-1` and the collapse acts back on the target register.
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotTrace {
    pub fidelities: Vec<f64>,
    /// `<target| rho_T |target>` of the target register after each iteration.
    pub target_retention: Vec<f64>,
}

/// `<psi| rho_R |psi>` where `rho_R` is the reduced state of `state` on the
/// contiguous register `reg`.
pub fn register_overlap(state: &PureState, reg: std::ops::Range<usize>, psi: &PureState) -> Result<f64> {
    let n = state.n_qubits();
    let k = reg.len();
    check_same_size(k, psi.n_qubits())?;
    if reg.end > n {
        return Err(QsnapError::IndexOutOfRange { index: reg.end - 1, n_qubits: n });
    }
    let low = n - reg.end;
    let high = reg.start;
    let amps = state.amplitudes();
    let target = psi.amplitudes();
    let mut total = 0.0;
    for hi in 0..1usize << high {
        for lo in 0..1usize << low {
            let overlap: num_complex::Complex64 = (0..1usize << k)
                .map(|r| target[r].conj() * amps[(hi << (k + low)) | (r << low) | lo])
                .sum();
            total += overlap.norm_sqr();
        }
    }
    Ok(total)
}

/// The single-copy feedback loop: the target is prepared once; every
/// iteration resets ancilla and candidate, loads the candidate supplied by
/// `candidate_source(iteration, previous_fidelity)` and runs the SWAP test.
pub fn iterate_snapshot<F>(
    target: &TargetSpec,
    mut candidate_source: F,
    layout: RegisterLayout,
    budget: usize,
    readout: SnapshotReadout,
    rng: &mut RngStream,
) -> Result<SnapshotTrace>
where
    F: FnMut(usize, Option<f64>) -> Result<PureState>,
{
    if budget == 0 {
        return Err(QsnapError::InvalidParameter("snapshot budget must be at least 1".into()));
    }
    let psi = match &target.state {
        TargetState::Pure(p) => p,
        TargetState::Mixed(_) => return Err(QsnapError::Unsupported("snapshot loop needs a pure target".into())),
    };
    check_same_size(layout.n, psi.n_qubits())?;

    let mut state = PureState::zero(layout.total_qubits());
    state.apply_all(&shift(&mottonen_circuit(psi)?, layout.target().start))?;

    let mut scratch: Vec<usize> = vec![layout.ancilla()];
    scratch.extend(layout.candidate());
    let interferometer = layout.interferometer();

    let mut trace = SnapshotTrace { fidelities: Vec::with_capacity(budget), target_retention: Vec::with_capacity(budget) };
    let mut last = None;
    for i in 0..budget {
        let step = |state: &mut PureState, rng: &mut RngStream, last: Option<f64>, source: &mut F| -> Result<f64> {
            state.reset_in_place(&scratch, rng)?;
            let candidate = source(i, last)?;
            check_same_size(layout.n, candidate.n_qubits())?;
            state.apply_all(&shift(&mottonen_circuit(&candidate)?, layout.candidate().start))?;
            state.apply_all(&interferometer)?;
            match readout {
                SnapshotReadout::Coherent => {
                    let f = state.expectation_z(layout.ancilla())?;
                    state.apply_all(&interferometer)?;
                    Ok(f)
                }
                SnapshotReadout::Measured => {
                    let bit = state.measure(layout.ancilla(), rng)?;
                    Ok(if bit == 0 { 1.0 } else { -1.0 })
                }
            }
        };
        let f = step(&mut state, rng, last, &mut candidate_source).map_err(|e| e.at_iteration(i))?;
        trace.fidelities.push(f);
        trace.target_retention.push(register_overlap(&state, layout.target(), psi)?);
        last = Some(f);
    }
    Ok(trace)
}
