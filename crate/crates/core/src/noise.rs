//! Kraus channels built from scalar device parameters, and noisy circuit
//! execution on density matrices or sampled pure-state trajectories.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QsnapError, Result};
use crate::rng::RngStream;
use crate::simcore::kernel::{adjoint, kron, matmul};
use crate::simcore::{DensityMatrix, GateKind, GateOp, PureState, Register};
use crate::tolerance::TOL;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn identity(dim: usize) -> Vec<Complex64> {
    let mut m = vec![ZERO; dim * dim];
    (0..dim).for_each(|i| m[i * dim + i] = ONE);
    m
}

fn scaled(m: &[Complex64], s: f64) -> Vec<Complex64> {
    m.iter().map(|x| x * s).collect()
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QsnapError::InvalidParameter(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// A CPTP map given by Kraus operators on 1 or 2 qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    arity: usize,
    operators: Vec<Vec<Complex64>>,
}

impl KrausChannel {
    /// Validates shapes and completeness.
    pub fn new(arity: usize, operators: Vec<Vec<Complex64>>) -> Result<Self> {
        if !(1..=2).contains(&arity) {
            return Err(QsnapError::InvalidParameter(format!("channel arity {arity} not in 1..=2")));
        }
        let d = 1usize << arity;
        if operators.is_empty() {
            return Err(QsnapError::InvalidParameter("channel has no operators".into()));
        }
        if let Some(bad) = operators.iter().find(|k| k.len() != d * d) {
            return Err(QsnapError::DimensionMismatch { expected: d * d, got: bad.len() });
        }
        let ch = KrausChannel { arity, operators };
        let r = ch.completeness_residual();
        if r > TOL.structural {
            return Err(QsnapError::InvalidParameter(format!("completeness residual {r:e}")));
        }
        Ok(ch)
    }

    pub fn identity(arity: usize) -> Self {
        KrausChannel { arity, operators: vec![identity(1 << arity)] }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    pub fn operators(&self) -> &[Vec<Complex64>] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// `max |sum K^dagger K - I|`.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.dim();
        let mut acc = vec![ZERO; d * d];
        for k in &self.operators {
            let kk = matmul(&adjoint(k), k);
            acc.iter_mut().zip(kk).for_each(|(a, b)| *a += b);
        }
        acc.iter().zip(identity(d)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// True when the channel acts as the identity map.
    pub fn is_identity(&self) -> bool {
        let s = self.superoperator();
        let id = identity(self.dim() * self.dim());
        s.iter().zip(&id).all(|(a, b)| (a - b).norm() < 1e-15)
    }

    /// Drops operators with Frobenius norm below `1e-15`.
    pub fn pruned(mut self) -> Self {
        self.operators.retain(|k| k.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() >= 1e-15);
        if self.operators.is_empty() {
            self.operators.push(vec![ZERO; self.dim() * self.dim()]);
        }
        self
    }

    /// `sum_i K_i (x) conj(K_i)`, acting on the row-major vectorization.
    pub fn superoperator(&self) -> Vec<Complex64> {
        let d2 = self.dim() * self.dim();
        let mut s = vec![ZERO; d2 * d2];
        for k in &self.operators {
            let conj: Vec<Complex64> = k.iter().map(|x| x.conj()).collect();
            s.iter_mut().zip(kron(k, &conj)).for_each(|(a, b)| *a += b);
        }
        s
    }

    /// Independent action on two qubits: `{A_i (x) B_j}`.
    pub fn tensor(&self, other: &KrausChannel) -> Result<KrausChannel> {
        if self.arity + other.arity > 2 {
            return Err(QsnapError::Unsupported("channels wider than two qubits".into()));
        }
        let ops = self
            .operators
            .iter()
            .flat_map(|a| other.operators.iter().map(move |b| kron(a, b)))
            .collect();
        Ok(KrausChannel { arity: self.arity + other.arity, operators: ops })
    }
}

/// `{sqrt(1-p) I, sqrt(p) X}`.
pub fn bitflip_channel(p: f64) -> Result<KrausChannel> {
    check_probability("p_bitflip", p)?;
    let x = vec![ZERO, ONE, ONE, ZERO];
    KrausChannel::new(1, vec![scaled(&identity(2), (1.0 - p).sqrt()), scaled(&x, p.sqrt())])
}

fn paulis() -> [Vec<Complex64>; 4] {
    let i = Complex64::new(0.0, 1.0);
    [
        identity(2),
        vec![ZERO, ONE, ONE, ZERO],
        vec![ZERO, -i, i, ZERO],
        vec![ONE, ZERO, ZERO, -ONE],
    ]
}

/// `rho -> (1-p) rho + p I/d` on 1 or 2 qubits, as a weighted Pauli set.
pub fn depolarizing_channel(p: f64, arity: usize) -> Result<KrausChannel> {
    check_probability("depolarizing p", p)?;
    let basis: Vec<Vec<Complex64>> = match arity {
        1 => paulis().to_vec(),
        2 => {
            let ps = paulis();
            ps.iter().flat_map(|a| ps.iter().map(move |b| kron(a, b))).collect()
        }
        _ => return Err(QsnapError::InvalidParameter(format!("depolarizing arity {arity} not in 1..=2"))),
    };
    let n_terms = basis.len() as f64;
    let ops = basis
        .iter()
        .enumerate()
        .map(|(j, pauli)| {
            let w = if j == 0 { 1.0 - p + p / n_terms } else { p / n_terms };
            scaled(pauli, w.sqrt())
        })
        .collect();
    KrausChannel::new(arity, ops)
}

/// Amplitude damping (`gamma = 1 - exp(-t/T1)`) followed by pure dephasing
/// chosen so coherences decay as `exp(-t/T2)`. `T1`, `T2` in microseconds,
/// `t_ns` in nanoseconds.
pub fn thermal_relaxation_channel(t1_us: f64, t2_us: f64, t_ns: f64) -> Result<KrausChannel> {
    if !(t1_us > 0.0) || !(t2_us > 0.0) || !(t_ns >= 0.0) {
        return Err(QsnapError::InvalidParameter(format!(
            "thermal relaxation needs T1 > 0, T2 > 0, t >= 0 (got {t1_us}, {t2_us}, {t_ns})"
        )));
    }
    if t2_us > 2.0 * t1_us {
        return Err(QsnapError::InvalidParameter(format!("unphysical T2 = {t2_us} > 2 T1 = {}", 2.0 * t1_us)));
    }
    let t_us = t_ns * 1e-3;
    let gamma = 1.0 - (-t_us / t1_us).exp();
    let keep = (-t_us * (1.0 / t2_us - 0.5 / t1_us)).exp();
    let lambda = (1.0 - keep * keep).max(0.0);
    let c = |x: f64| Complex64::new(x, 0.0);

    let damping = [
        vec![ONE, ZERO, ZERO, c((1.0 - gamma).sqrt())],
        vec![ZERO, c(gamma.sqrt()), ZERO, ZERO],
    ];
    let dephasing = [
        vec![ONE, ZERO, ZERO, c(keep)],
        vec![ZERO, ZERO, ZERO, c(lambda.sqrt())],
    ];
    let ops = dephasing.iter().flat_map(|b| damping.iter().map(move |a| matmul(b, a))).collect();
    Ok(KrausChannel::new(1, ops)?.pruned())
}

/// Sequential composition: `first`, then `second`. Operators are all
/// products `K_second K_first`, unpruned.
pub fn compose_channels(first: &KrausChannel, second: &KrausChannel) -> Result<KrausChannel> {
    if first.arity != second.arity {
        return Err(QsnapError::DimensionMismatch { expected: first.arity, got: second.arity });
    }
    let ops = second
        .operators
        .iter()
        .flat_map(|b| first.operators.iter().map(move |a| matmul(b, a)))
        .collect();
    Ok(KrausChannel { arity: first.arity, operators: ops })
}

fn check_channel_qubits(ch: &KrausChannel, qubits: &[usize], n_qubits: usize) -> Result<()> {
    if qubits.len() != ch.arity {
        return Err(QsnapError::Arity { kind: "kraus channel", expected: ch.arity, got: qubits.len() });
    }
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n_qubits {
            return Err(QsnapError::IndexOutOfRange { index: q, n_qubits });
        }
        if qubits[..i].contains(&q) {
            return Err(QsnapError::DuplicateQubit(q));
        }
    }
    Ok(())
}

/// `rho -> sum_i K_i rho K_i^dagger` on the listed qubits.
pub fn apply_channel_dm(rho: &DensityMatrix, ch: &KrausChannel, qubits: &[usize]) -> Result<DensityMatrix> {
    check_channel_qubits(ch, qubits, rho.n_qubits())?;
    let mut out = rho.clone();
    out.apply_superoperator(qubits, &ch.superoperator());
    Ok(out)
}

fn sample_kraus_in_place(psi: &mut PureState, ch: &KrausChannel, qubits: &[usize], rng: &mut RngStream) -> Result<()> {
    if ch.len() == 1 {
        // A complete single-operator channel is unitary.
        psi.apply_operator(qubits, &ch.operators[0]);
        return Ok(());
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for k in &ch.operators {
        let mut branch = psi.clone();
        branch.apply_operator(qubits, k);
        let p = branch.norm().powi(2);
        acc += p;
        if p > 0.0 {
            last = Some(branch);
            if u < acc {
                break;
            }
        }
    }
    // Round-off can leave u just above the accumulated total; the last
    // non-empty branch absorbs it.
    *psi = last.ok_or(QsnapError::ZeroProbabilityBranch(acc))?;
    renormalize(psi)
}

fn renormalize(psi: &mut PureState) -> Result<()> {
    let norm = psi.norm();
    if norm < TOL.branch_floor {
        return Err(QsnapError::ZeroProbabilityBranch(norm * norm));
    }
    psi.amplitudes_mut().iter_mut().for_each(|a| *a /= norm);
    Ok(())
}

/// One Monte-Carlo unraveling step: picks `K_i` with probability
/// `|K_i psi|^2` and returns the renormalized branch.
pub fn sample_trajectory_op(
    state: &PureState,
    ch: &KrausChannel,
    qubits: &[usize],
    rng: &mut RngStream,
) -> Result<PureState> {
    check_channel_qubits(ch, qubits, state.n_qubits())?;
    let mut out = state.clone();
    sample_kraus_in_place(&mut out, ch, qubits, rng)?;
    Ok(out)
}

/// Where gate noise enters the SWAP-test circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseAttachment {
    /// Hadamard and controlled-SWAP execute ideally; every basis gate (state
    /// preparation) and every readout is noisy.
    #[default]
    Native,
    /// Hadamard and controlled-SWAP are lowered to `{rz, sx, x, cx}` first,
    /// so they pick up basis-gate noise as well.
    Lowered,
}

fn default_noisy_instructions() -> Vec<String> {
    ["id", "rz", "sx", "x", "cx", "delay", "measure"].iter().map(|s| s.to_string()).collect()
}

/// Scalar device parameters and the instructions they attach to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModelSpec {
    pub p_bitflip: f64,
    pub p_dep1: f64,
    pub p_dep2: f64,
    /// Microseconds.
    pub t1_us: f64,
    /// Microseconds.
    pub t2_us: f64,
    /// Nanoseconds.
    pub t_gate_ns: f64,
    #[serde(default = "default_noisy_instructions")]
    pub noisy_instructions: Vec<String>,
    #[serde(default)]
    pub attachment: NoiseAttachment,
}

impl Default for NoiseModelSpec {
    fn default() -> Self {
        default_noise_model()
    }
}

/// Device parameters of the reference noise table.
pub fn default_noise_model() -> NoiseModelSpec {
    NoiseModelSpec {
        p_bitflip: 0.001,
        p_dep1: 0.002,
        p_dep2: 0.02,
        t1_us: 80.0,
        t2_us: 100.0,
        t_gate_ns: 50.0,
        noisy_instructions: default_noisy_instructions(),
        attachment: NoiseAttachment::Native,
    }
}

impl NoiseModelSpec {
    /// Every probability and duration zeroed.
    pub fn noiseless() -> Self {
        NoiseModelSpec { p_bitflip: 0.0, p_dep1: 0.0, p_dep2: 0.0, t_gate_ns: 0.0, ..default_noise_model() }
    }

    pub fn with_attachment(mut self, attachment: NoiseAttachment) -> Self {
        self.attachment = attachment;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_bitflip", self.p_bitflip)?;
        check_probability("p_dep1", self.p_dep1)?;
        check_probability("p_dep2", self.p_dep2)?;
        thermal_relaxation_channel(self.t1_us, self.t2_us, self.t_gate_ns)?;
        for name in &self.noisy_instructions {
            if !["id", "rz", "sx", "x", "cx", "delay", "measure", "reset"].contains(&name.as_str()) {
                return Err(QsnapError::Config(format!("unknown noisy instruction '{name}'")));
            }
        }
        Ok(())
    }

    pub fn is_noisy(&self, instruction: &str) -> bool {
        self.noisy_instructions.iter().any(|s| s == instruction)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NoiseModelSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// A channel stage acting on a subset of a gate's operands (indices into
/// the gate's qubit list).
#[derive(Debug, Clone)]
pub struct ChannelStage {
    pub channel: KrausChannel,
    pub operands: Vec<usize>,
}

/// A composite gate-noise channel kept both as one Kraus set (for
/// inspection and density-matrix simulation) and as its factor stages (for
/// cheaper trajectory sampling).
#[derive(Debug, Clone)]
pub struct GateNoise {
    pub label: &'static str,
    pub composite: KrausChannel,
    pub stages: Vec<ChannelStage>,
    superop: Vec<Complex64>,
}

impl GateNoise {
    fn new(label: &'static str, composite: KrausChannel, stages: Vec<ChannelStage>) -> Self {
        let superop = composite.superoperator();
        GateNoise { label, composite, stages, superop }
    }
}

/// Channels compiled from a [`NoiseModelSpec`].
#[derive(Debug, Clone)]
pub struct NoiseModel {
    spec: NoiseModelSpec,
    single: GateNoise,
    cx: GateNoise,
    thermal: KrausChannel,
}

/// Per-channel summary line for inspection reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub name: String,
    pub arity: usize,
    pub operators: usize,
    pub completeness_residual: f64,
    pub identity: bool,
}

impl NoiseModel {
    pub fn new(spec: &NoiseModelSpec) -> Result<Self> {
        spec.validate()?;
        let bitflip = bitflip_channel(spec.p_bitflip)?;
        let dep1 = depolarizing_channel(spec.p_dep1, 1)?;
        let dep2 = depolarizing_channel(spec.p_dep2, 2)?;
        let thermal = thermal_relaxation_channel(spec.t1_us, spec.t2_us, spec.t_gate_ns)?;
        let thermal2 = thermal.tensor(&thermal)?;

        let single = GateNoise::new(
            "single-qubit (bitflip, depolarizing)",
            compose_channels(&dep1, &bitflip)?.pruned(),
            vec![
                ChannelStage { channel: dep1.pruned(), operands: vec![0] },
                ChannelStage { channel: bitflip.pruned(), operands: vec![0] },
            ],
        );
        let cx = GateNoise::new(
            "cx (thermal on both, then depolarizing)",
            compose_channels(&thermal2, &dep2)?.pruned(),
            vec![
                ChannelStage { channel: thermal.clone(), operands: vec![0] },
                ChannelStage { channel: thermal.clone(), operands: vec![1] },
                ChannelStage { channel: dep2.pruned(), operands: vec![0, 1] },
            ],
        );
        Ok(NoiseModel { spec: spec.clone(), single, cx, thermal })
    }

    pub fn spec(&self) -> &NoiseModelSpec {
        &self.spec
    }

    pub fn single_qubit(&self) -> &GateNoise {
        &self.single
    }

    pub fn cx(&self) -> &GateNoise {
        &self.cx
    }

    pub fn thermal(&self) -> &KrausChannel {
        &self.thermal
    }

    /// Readout flip probability applied to every noisy measurement.
    pub fn readout_flip(&self) -> f64 {
        if self.spec.is_noisy("measure") {
            self.spec.p_bitflip
        } else {
            0.0
        }
    }

    /// Probability of reading 0 after the classical readout flip.
    pub fn observed_p0(&self, p0: f64) -> f64 {
        let f = self.readout_flip();
        p0 * (1.0 - f) + (1.0 - p0) * f
    }

    pub fn summaries(&self) -> Vec<ChannelSummary> {
        let mut out = Vec::new();
        let mut push = |name: String, ch: &KrausChannel| {
            out.push(ChannelSummary {
                name,
                arity: ch.arity(),
                operators: ch.len(),
                completeness_residual: ch.completeness_residual(),
                identity: ch.is_identity(),
            })
        };
        push(format!("bitflip(p={})", self.spec.p_bitflip), &bitflip_channel(self.spec.p_bitflip).expect("validated"));
        push(format!("depolarizing_1q(p={})", self.spec.p_dep1), &depolarizing_channel(self.spec.p_dep1, 1).expect("validated"));
        push(format!("depolarizing_2q(p={})", self.spec.p_dep2), &depolarizing_channel(self.spec.p_dep2, 2).expect("validated"));
        push(
            format!("thermal(T1={}us, T2={}us, t={}ns)", self.spec.t1_us, self.spec.t2_us, self.spec.t_gate_ns),
            &self.thermal,
        );
        push(self.single.label.to_string(), &self.single.composite);
        push(self.cx.label.to_string(), &self.cx.composite);
        out
    }

    fn delay_channel(&self, ns: f64) -> Result<KrausChannel> {
        thermal_relaxation_channel(self.spec.t1_us, self.spec.t2_us, ns.max(0.0))
    }

    fn noise_for(&self, kind: &GateKind) -> Option<&GateNoise> {
        if !self.spec.is_noisy(kind.name()) {
            return None;
        }
        match kind {
            GateKind::Id | GateKind::RZ(_) | GateKind::SX | GateKind::PauliX => Some(&self.single),
            GateKind::CNOT => Some(&self.cx),
            _ => None,
        }
    }

    /// Expands a gate according to the attachment policy.
    fn expand(&self, op: &GateOp) -> Vec<GateOp> {
        match self.spec.attachment {
            NoiseAttachment::Lowered if !op.kind.is_basis() => op.lower(),
            _ => vec![op.clone()],
        }
    }

    /// Runs a noisy circuit on a density matrix. Measurements are rejected
    /// (read probabilities from the final state instead).
    pub fn run_dm(&self, rho: &mut DensityMatrix, ops: &[GateOp]) -> Result<()> {
        let mut scratch = RngStream::new(0);
        for op in ops {
            for g in self.expand(op) {
                g.validate(rho.n_qubits())?;
                match g.kind {
                    GateKind::Reset => rho.reset_in_place(&g.qubits, &mut scratch)?,
                    GateKind::MeasureZ => return Err(QsnapError::NonUnitary("measure")),
                    GateKind::Delay(ns) => {
                        if self.spec.is_noisy("delay") {
                            rho.apply_superoperator(&g.qubits, &self.delay_channel(ns)?.superoperator());
                        }
                    }
                    _ => {
                        rho.apply(&g)?;
                        if let Some(noise) = self.noise_for(&g.kind) {
                            rho.apply_superoperator(&g.qubits, &noise.superop);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Runs one sampled trajectory of a noisy circuit, returning measured
    /// bits (after readout flips) in program order.
    pub fn run_trajectory(&self, psi: &mut PureState, ops: &[GateOp], rng: &mut RngStream) -> Result<Vec<u8>> {
        let mut bits = Vec::new();
        for op in ops {
            for g in self.expand(op) {
                g.validate(psi.n_qubits())?;
                match g.kind {
                    GateKind::Reset => psi.reset_in_place(&g.qubits, rng)?,
                    GateKind::MeasureZ => {
                        let mut bit = psi.measure(g.qubits[0], rng)?;
                        let f = self.readout_flip();
                        if f > 0.0 && rng.random::<f64>() < f {
                            bit ^= 1;
                        }
                        bits.push(bit);
                    }
                    GateKind::Delay(ns) => {
                        if self.spec.is_noisy("delay") {
                            sample_kraus_in_place(psi, &self.delay_channel(ns)?, &g.qubits, rng)?;
                        }
                    }
                    _ => {
                        psi.apply(&g)?;
                        if let Some(noise) = self.noise_for(&g.kind) {
                            for stage in &noise.stages {
                                let qs: Vec<usize> = stage.operands.iter().map(|&i| g.qubits[i]).collect();
                                sample_kraus_in_place(psi, &stage.channel, &qs, rng)?;
                            }
                        }
                    }
                }
            }
        }
        Ok(bits)
    }
}
