//! Single-copy quantum state reconstruction driven by SWAP-test fidelity.
//!
//! An unknown pure state is held on a target register; a classical optimizer
//! proposes candidate states, loads them onto a second register and reads
//! back only the SWAP-test fidelity between the two. Two optimizers are
//! provided: an evolution strategy ([`qeswap`]) and a neural generator trained
//! with finite-difference gradients ([`neurogen`]).
//!
//! The crate is organised bottom-up:
//!
//! * [`simcore`]: statevector and density-matrix simulation.
//! * [`stateprep`]: random targets, Mottonen circuits, parameter decoders.
//! * [`noise`]: Kraus channels and the gate-level noise model.
//! * [`swaptest`]: the SWAP-test feedback signal in its exact, sampled and
//!   noisy forms.
//! * [`metrics`]: entropies and mixed-state distance measures.
//! * [`harness`]: experiment runner, persistence and reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod metrics;
pub mod neurogen;
pub mod noise;
pub mod objective;
pub mod qeswap;
pub mod record;
pub mod rng;
pub mod simcore;
pub mod stateprep;
pub mod swaptest;
pub mod tolerance;

pub use error::{QsnapError, Result};
pub use num_complex::Complex64;
pub use objective::{Candidate, FidelityMode, Objective};
pub use record::TrialRecord;
pub use rng::RngStream;
pub use simcore::{DensityMatrix, GateKind, GateOp, PureState};
pub use stateprep::{Representation, TargetSpec, TargetState};
