use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QsnapError, Result};

/// Instruction kinds understood by the simulator.
///
/// `RZ`, `SX`, `PauliX`, `CNOT`, `Id`, `Delay`, `Reset` and `MeasureZ` form the
/// hardware basis. `Hadamard` and `ControlledSWAP` are convenience gates that
/// [`GateOp::lower`] rewrites into the basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    Hadamard,
    PauliX,
    RZ(f64),
    SX,
    CNOT,
    ControlledSWAP,
    Id,
    /// Idle for the given number of nanoseconds.
    Delay(f64),
    Reset,
    MeasureZ,
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::Hadamard => "h",
            GateKind::PauliX => "x",
            GateKind::RZ(_) => "rz",
            GateKind::SX => "sx",
            GateKind::CNOT => "cx",
            GateKind::ControlledSWAP => "cswap",
            GateKind::Id => "id",
            GateKind::Delay(_) => "delay",
            GateKind::Reset => "reset",
            GateKind::MeasureZ => "measure",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            GateKind::CNOT => 2,
            GateKind::ControlledSWAP => 3,
            _ => 1,
        }
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(self, GateKind::Reset | GateKind::MeasureZ)
    }

    pub fn is_basis(&self) -> bool {
        !matches!(self, GateKind::Hadamard | GateKind::ControlledSWAP)
    }

    /// Row-major unitary matrix; `None` for reset and measurement.
    pub fn matrix(&self) -> Option<Vec<Complex64>> {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let m = match *self {
            GateKind::Hadamard => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                vec![h, h, h, -h]
            }
            GateKind::PauliX => vec![z, o, o, z],
            GateKind::RZ(theta) => vec![
                Complex64::from_polar(1.0, -theta / 2.0),
                z,
                z,
                Complex64::from_polar(1.0, theta / 2.0),
            ],
            GateKind::SX => {
                let p = Complex64::new(0.5, 0.5);
                let q = Complex64::new(0.5, -0.5);
                vec![p, q, q, p]
            }
            GateKind::CNOT => {
                let mut m = vec![z; 16];
                m[0] = o;
                m[5] = o;
                m[11] = o;
                m[14] = o;
                m
            }
            GateKind::ControlledSWAP => {
                let mut m = vec![z; 64];
                for i in 0..8usize {
                    let j = match i {
                        5 => 6,
                        6 => 5,
                        other => other,
                    };
                    m[j * 8 + i] = o;
                }
                m
            }
            GateKind::Id | GateKind::Delay(_) => vec![o, z, z, o],
            GateKind::Reset | GateKind::MeasureZ => return None,
        };
        Some(m)
    }
}

/// One instruction with its ordered qubit operands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

impl GateOp {
    pub fn new(kind: GateKind, qubits: Vec<usize>) -> Result<Self> {
        let op = GateOp { kind, qubits };
        op.check_shape()?;
        Ok(op)
    }

    pub fn h(q: usize) -> Self {
        GateOp { kind: GateKind::Hadamard, qubits: vec![q] }
    }

    pub fn x(q: usize) -> Self {
        GateOp { kind: GateKind::PauliX, qubits: vec![q] }
    }

    pub fn rz(theta: f64, q: usize) -> Self {
        GateOp { kind: GateKind::RZ(theta), qubits: vec![q] }
    }

    pub fn sx(q: usize) -> Self {
        GateOp { kind: GateKind::SX, qubits: vec![q] }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        GateOp { kind: GateKind::CNOT, qubits: vec![control, target] }
    }

    pub fn cswap(control: usize, a: usize, b: usize) -> Self {
        GateOp { kind: GateKind::ControlledSWAP, qubits: vec![control, a, b] }
    }

    pub fn id(q: usize) -> Self {
        GateOp { kind: GateKind::Id, qubits: vec![q] }
    }

    pub fn delay(ns: f64, q: usize) -> Self {
        GateOp { kind: GateKind::Delay(ns), qubits: vec![q] }
    }

    pub fn reset(q: usize) -> Self {
        GateOp { kind: GateKind::Reset, qubits: vec![q] }
    }

    pub fn measure(q: usize) -> Self {
        GateOp { kind: GateKind::MeasureZ, qubits: vec![q] }
    }

    fn check_shape(&self) -> Result<()> {
        let expected = self.kind.arity();
        if self.qubits.len() != expected {
            return Err(QsnapError::Arity {
                kind: self.kind.name(),
                expected,
                got: self.qubits.len(),
            });
        }
        for (i, q) in self.qubits.iter().enumerate() {
            if self.qubits[..i].contains(q) {
                return Err(QsnapError::DuplicateQubit(*q));
            }
        }
        Ok(())
    }

    /// Validates operands against a register of `n_qubits`.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        self.check_shape()?;
        if let Some(&q) = self.qubits.iter().find(|&&q| q >= n_qubits) {
            return Err(QsnapError::IndexOutOfRange { index: q, n_qubits });
        }
        if let GateKind::Delay(ns) = self.kind {
            if !(ns >= 0.0 && ns.is_finite()) {
                return Err(QsnapError::InvalidParameter(format!("delay duration {ns} ns")));
            }
        }
        Ok(())
    }

    /// Gate sequence implementing the inverse of this (unitary) gate.
    pub fn inverse(&self) -> Result<Vec<GateOp>> {
        let q = &self.qubits;
        Ok(match self.kind {
            GateKind::RZ(theta) => vec![GateOp::rz(-theta, q[0])],
            // SX^4 = I
            GateKind::SX => vec![GateOp::sx(q[0]); 3],
            GateKind::Reset | GateKind::MeasureZ => {
                return Err(QsnapError::NonUnitary(self.kind.name()))
            }
            _ => vec![self.clone()],
        })
    }

    /// Rewrites the gate into the hardware basis `{rz, sx, x, cx}`, exactly up
    /// to a global phase. Basis gates are returned unchanged.
    pub fn lower(&self) -> Vec<GateOp> {
        match self.kind {
            GateKind::Hadamard => lower_hadamard(self.qubits[0]),
            GateKind::ControlledSWAP => {
                let (c, a, b) = (self.qubits[0], self.qubits[1], self.qubits[2]);
                let mut ops = vec![GateOp::cx(b, a)];
                ops.extend(lower_toffoli(c, a, b));
                ops.push(GateOp::cx(b, a));
                ops
            }
            _ => vec![self.clone()],
        }
    }
}

/// Lowers a whole circuit into the hardware basis.
pub fn lower_circuit(ops: &[GateOp]) -> Vec<GateOp> {
    ops.iter().flat_map(GateOp::lower).collect()
}

fn lower_hadamard(q: usize) -> Vec<GateOp> {
    vec![GateOp::rz(FRAC_PI_2, q), GateOp::sx(q), GateOp::rz(FRAC_PI_2, q)]
}

/// RY(theta) in the basis, time ordered, up to a global phase.
pub fn ry_in_basis(theta: f64, q: usize) -> Vec<GateOp> {
    vec![
        GateOp::sx(q),
        GateOp::rz(theta + PI, q),
        GateOp::sx(q),
        GateOp::rz(PI, q),
    ]
}

fn lower_toffoli(x: usize, y: usize, t: usize) -> Vec<GateOp> {
    let tg = |q| GateOp::rz(FRAC_PI_4, q);
    let tdg = |q| GateOp::rz(-FRAC_PI_4, q);
    let mut ops = lower_hadamard(t);
    ops.extend([
        GateOp::cx(y, t),
        tdg(t),
        GateOp::cx(x, t),
        tg(t),
        GateOp::cx(y, t),
        tdg(t),
        GateOp::cx(x, t),
        tg(y),
        tg(t),
    ]);
    ops.extend(lower_hadamard(t));
    ops.extend([GateOp::cx(x, y), tg(x), tdg(y), GateOp::cx(x, y)]);
    ops
}
