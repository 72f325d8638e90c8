//! Decoded candidates and the fidelity signal the optimizers maximize.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QsnapError, Result};
use crate::metrics::uhlmann_fidelity;
use crate::noise::NoiseModelSpec;
use crate::rng::RngStream;
use crate::simcore::{DensityMatrix, PureState};
use crate::stateprep::{decode_density, decode_statevector, decode_unitary, Representation, TargetSpec, TargetState};
use crate::swaptest::{fidelity_oracle, swap_test_exact, swap_test_mixed_exact, swap_test_sampled, NoisySwapTest};

pub const DEFAULT_SHOTS: u64 = 1024;

/// How the SWAP-test fidelity is read out.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FidelityMode {
    /// Exact ancilla expectation.
    #[default]
    Exact,
    /// Binomial shot noise around the exact value.
    Sampled { shots: u64 },
    /// Gate-level noise model; exact noisy expectation when `shots` is
    /// `None`.
    Noisy { noise: NoiseModelSpec, shots: Option<u64> },
}

impl FidelityMode {
    pub fn label(&self) -> String {
        match self {
            FidelityMode::Exact => "exact".into(),
            FidelityMode::Sampled { shots } => format!("sampled({shots})"),
            FidelityMode::Noisy { shots: Some(s), .. } => format!("noisy({s})"),
            FidelityMode::Noisy { shots: None, .. } => "noisy(exact)".into(),
        }
    }

    /// True when evaluations consume randomness.
    pub fn is_stochastic(&self) -> bool {
        !matches!(self, FidelityMode::Exact | FidelityMode::Noisy { shots: None, .. })
    }
}

/// Which quantity the optimizer maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// The SWAP-test estimate (`Tr(rho sigma)` on mixed inputs).
    #[default]
    SwapTest,
    /// Uhlmann fidelity, computed classically. Not measurable by the SWAP
    /// test; used as the mixed-state reference objective.
    Uhlmann,
}

/// A decoded optimizer proposal.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidate {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl Candidate {
    pub fn n_qubits(&self) -> usize {
        match self {
            Candidate::Pure(p) => p.n_qubits(),
            Candidate::Mixed(m) => m.n_qubits(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            Candidate::Pure(p) => DensityMatrix::from_pure(p),
            Candidate::Mixed(m) => m.clone(),
        }
    }

    pub fn as_pure(&self) -> Option<&PureState> {
        match self {
            Candidate::Pure(p) => Some(p),
            Candidate::Mixed(_) => None,
        }
    }

    /// Leading eigenvector for mixed candidates, the state itself otherwise.
    pub fn dominant_pure(&self) -> PureState {
        match self {
            Candidate::Pure(p) => p.clone(),
            Candidate::Mixed(m) => {
                let (vals, vecs) = crate::simcore::linalg::hermitian_eigen(&m.to_matrix());
                let top = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
                let col: Vec<_> = vecs.column(top).iter().copied().collect();
                PureState::normalized(col).expect("eigenvectors have unit norm")
            }
        }
    }
}

/// Decodes a real parameter vector under `repr`.
pub fn decode_candidate(repr: Representation, w: &[f64]) -> Result<Candidate> {
    match repr {
        Representation::StateVector => decode_statevector(w).map(Candidate::Pure),
        Representation::Unitary => decode_unitary(w).map(Candidate::Pure),
        Representation::DensityMatrix => decode_density(w).map(Candidate::Mixed),
    }
}

/// Scores candidates against one fixed target.
#[derive(Debug, Clone)]
pub struct Evaluator {
    target: TargetSpec,
    target_dm: DensityMatrix,
    mode: FidelityMode,
    objective: Objective,
    noisy: Option<NoisySwapTest>,
}

impl Evaluator {
    pub fn new(target: &TargetSpec, mode: &FidelityMode, objective: Objective) -> Result<Self> {
        let noisy = match (mode, &target.state) {
            (FidelityMode::Noisy { noise, .. }, TargetState::Pure(p)) => Some(NoisySwapTest::new(p, noise)?),
            (FidelityMode::Noisy { .. }, TargetState::Mixed(_)) => {
                return Err(QsnapError::Unsupported("noisy mode needs a pure target".into()))
            }
            _ => None,
        };
        if let FidelityMode::Sampled { shots: 0 } | FidelityMode::Noisy { shots: Some(0), .. } = mode {
            return Err(QsnapError::Config("shots must be at least 1".into()));
        }
        Ok(Evaluator { target: target.clone(), target_dm: target.state.to_density(), mode: mode.clone(), objective, noisy })
    }

    pub fn target(&self) -> &TargetSpec {
        &self.target
    }

    pub fn mode(&self) -> &FidelityMode {
        &self.mode
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    /// The optimizer's feedback value for `candidate`.
    pub fn evaluate(&self, candidate: &Candidate, rng: &mut RngStream) -> Result<f64> {
        if candidate.n_qubits() != self.target.n_qubits() {
            return Err(QsnapError::DimensionMismatch { expected: self.target.n_qubits(), got: candidate.n_qubits() });
        }
        if self.objective == Objective::Uhlmann {
            return uhlmann_fidelity(&self.target_dm, &candidate.to_density());
        }
        match (&self.target.state, candidate) {
            (TargetState::Pure(t), Candidate::Pure(c)) => match &self.mode {
                FidelityMode::Exact => Ok(swap_test_exact(t, c)?.fidelity_estimate),
                FidelityMode::Sampled { shots } => Ok(swap_test_sampled(t, c, *shots, None, rng)?.fidelity_estimate),
                FidelityMode::Noisy { shots, .. } => {
                    let noisy = self.noisy.as_ref().expect("built with the evaluator");
                    match shots {
                        None => Ok(noisy.exact(c)?.fidelity_estimate),
                        Some(s) => Ok(noisy.sampled(c, *s, rng)?.fidelity_estimate),
                    }
                }
            },
            _ => {
                let hs = swap_test_mixed_exact(&self.target_dm, &candidate.to_density())?;
                match &self.mode {
                    FidelityMode::Exact => Ok(hs),
                    FidelityMode::Sampled { shots } => {
                        let p0 = ((1.0 + hs) / 2.0).clamp(0.0, 1.0);
                        let zeros = Binomial::new(*shots, p0)
                            .map_err(|e| QsnapError::InvalidParameter(format!("binomial draw: {e}")))?
                            .sample(rng);
                        Ok(2.0 * zeros as f64 / *shots as f64 - 1.0)
                    }
                    FidelityMode::Noisy { .. } => Err(QsnapError::Unsupported("noisy mode with mixed candidates".into())),
                }
            }
        }
    }

    /// Noise-free reconstruction quality: `|<t|c>|^2` for pure pairs,
    /// Uhlmann fidelity otherwise.
    pub fn oracle(&self, candidate: &Candidate) -> Result<f64> {
        match (&self.target.state, candidate) {
            (TargetState::Pure(t), Candidate::Pure(c)) => fidelity_oracle(t, c),
            _ => uhlmann_fidelity(&self.target_dm, &candidate.to_density()),
        }
    }

    /// `Tr(rho sigma)` against the target, regardless of the objective.
    pub fn hilbert_schmidt(&self, candidate: &Candidate) -> Result<f64> {
        swap_test_mixed_exact(&self.target_dm, &candidate.to_density())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::default_noise_model;
    use crate::stateprep::{encode_statevector, sample_random_density};

    #[test]
    fn labels() {
        assert_eq!(FidelityMode::Exact.label(), "exact");
        assert_eq!(FidelityMode::Sampled { shots: 1024 }.label(), "sampled(1024)");
        assert_eq!(FidelityMode::Noisy { noise: default_noise_model(), shots: Some(7) }.label(), "noisy(7)");
        assert!(!FidelityMode::Exact.is_stochastic());
    }

    #[test]
    fn mode_json_round_trip() {
        for mode in [
            FidelityMode::Exact,
            FidelityMode::Sampled { shots: 10 },
            FidelityMode::Noisy { noise: default_noise_model(), shots: None },
        ] {
            let text = serde_json::to_string(&mode).unwrap();
            assert_eq!(serde_json::from_str::<FidelityMode>(&text).unwrap(), mode);
        }
    }

    #[test]
    fn exact_evaluation_matches_oracle() {
        let target = TargetSpec::random(2, 3).unwrap();
        let ev = Evaluator::new(&target, &FidelityMode::Exact, Objective::SwapTest).unwrap();
        let mut rng = RngStream::new(4);
        let cand = Candidate::Pure(crate::stateprep::sample_random_state(2, &mut rng).unwrap());
        let a = ev.evaluate(&cand, &mut rng).unwrap();
        assert!((a - ev.oracle(&cand).unwrap()).abs() < 1e-10);
        let own = decode_candidate(Representation::StateVector, &encode_statevector(target.state.as_pure().unwrap())).unwrap();
        assert!((ev.evaluate(&own, &mut rng).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mixed_objectives_diverge_on_maximally_mixed() {
        let mm = DensityMatrix::maximally_mixed(1);
        let target = TargetSpec::mixed(mm.clone(), None);
        let mut rng = RngStream::new(1);
        let swap = Evaluator::new(&target, &FidelityMode::Exact, Objective::SwapTest).unwrap();
        let uhl = Evaluator::new(&target, &FidelityMode::Exact, Objective::Uhlmann).unwrap();
        let cand = Candidate::Mixed(mm);
        assert!((swap.evaluate(&cand, &mut rng).unwrap() - 0.5).abs() < 1e-12);
        assert!((uhl.evaluate(&cand, &mut rng).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_mode_rejects_mixed_target() {
        let rho = sample_random_density(1, &mut RngStream::new(2)).unwrap();
        let mode = FidelityMode::Noisy { noise: default_noise_model(), shots: None };
        assert!(Evaluator::new(&TargetSpec::mixed(rho, None), &mode, Objective::SwapTest).is_err());
        let t = TargetSpec::random(1, 1).unwrap();
        assert!(Evaluator::new(&t, &FidelityMode::Sampled { shots: 0 }, Objective::SwapTest).is_err());
    }

    #[test]
    fn dominant_pure_of_projector() {
        let psi = crate::stateprep::sample_random_state(2, &mut RngStream::new(5)).unwrap();
        let cand = Candidate::Mixed(DensityMatrix::from_pure(&psi));
        assert!((fidelity_oracle(&cand.dominant_pure(), &psi).unwrap() - 1.0).abs() < 1e-10);
    }
}
