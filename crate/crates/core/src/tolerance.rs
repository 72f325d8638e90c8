//! Numerical tolerance constants shared by the whole crate.

/// Tolerances used for structural checks (norms, traces, Hermiticity) and
/// algebraic identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Norm, trace and Hermiticity checks.
    pub structural: f64,
    /// Identities that hold up to floating-point round-off.
    pub algebraic: f64,
    /// Slack on negative eigenvalues of a density matrix.
    pub psd_slack: f64,
    /// Smallest admissible renormalization divisor after a projection.
    pub branch_floor: f64,
    /// Smallest admissible norm of an optimizer parameter vector.
    pub degenerate_norm: f64,
    /// Smallest admissible singular value when projecting onto unitaries.
    pub singular_floor: f64,
}

pub const TOL: Tolerances = Tolerances {
    structural: 1e-10,
    algebraic: 1e-12,
    psd_slack: 1e-9,
    branch_floor: 1e-15,
    degenerate_norm: 1e-12,
    singular_floor: 1e-10,
};

/// Largest register simulated as a dense density matrix before callers must
/// switch to trajectory sampling.
pub const DEFAULT_MAX_DM_QUBITS: usize = 9;
