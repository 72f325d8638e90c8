//! Statevector and density-matrix simulation.

mod density;
mod gate;
pub(crate) mod kernel;
pub mod linalg;
mod ops;
mod state;

pub use density::DensityMatrix;
pub use gate::{lower_circuit, ry_in_basis, GateKind, GateOp};
pub use ops::{
    apply_gate, apply_gate_dm, execute_on_zero, expectation_z, measure_z, partial_trace,
    reset_qubits, run_circuit, tensor, Register,
};
pub use state::PureState;
