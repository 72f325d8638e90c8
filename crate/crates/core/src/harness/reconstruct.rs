//! Single reconstructions from presets or target files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::store::{Provenance, SnapshotStore};
use super::{Method, ExperimentConfig};
use crate::error::{QsnapError, Result};
use crate::neurogen::{train_generator, GeneratorConfig};
use crate::objective::{Candidate, FidelityMode};
use crate::qeswap::{run_qeswap, ESParams};
use crate::record::TrialRecord;
use crate::rng::RngStream;
use crate::simcore::PureState;
use crate::stateprep::{Representation, TargetSpec};
use crate::Complex64;

/// Named targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Zero,
    One,
    /// `(|0> + |1>) / sqrt 2`.
    Hadamard,
    Random { seed: u64 },
}

impl FromStr for Preset {
    type Err = QsnapError;

    /// `zero`, `one`, `hadamard` (or `plus`), `random(7)` / `random:7`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "zero" | "0" => return Ok(Preset::Zero),
            "one" | "1" => return Ok(Preset::One),
            "hadamard" | "plus" | "+" => return Ok(Preset::Hadamard),
            _ => {}
        }
        let inner = t
            .strip_prefix("random")
            .map(|r| r.trim_start_matches(['(', ':', '=']).trim_end_matches(')'))
            .map(|r| r.trim_start_matches("seed="));
        match inner.map(str::parse::<u64>) {
            Some(Ok(seed)) => Ok(Preset::Random { seed }),
            _ => Err(QsnapError::Config(format!("unknown preset '{s}' (zero, one, hadamard, random(<seed>))"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Zero => f.write_str("zero"),
            Preset::One => f.write_str("one"),
            Preset::Hadamard => f.write_str("hadamard"),
            Preset::Random { seed } => write!(f, "random({seed})"),
        }
    }
}

impl Preset {
    /// Single-qubit presets ignore `n_qubits`.
    pub fn target(self, n_qubits: usize) -> Result<TargetSpec> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ok(match self {
            Preset::Zero => TargetSpec::pure(PureState::basis(1, 0), None),
            Preset::One => TargetSpec::pure(PureState::basis(1, 1), None),
            Preset::Hadamard => TargetSpec::pure(
                PureState::from_amplitudes(vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)])?,
                None,
            ),
            Preset::Random { seed } => TargetSpec::random(n_qubits, seed)?,
        })
    }

    fn slug(self) -> String {
        match self {
            Preset::Random { seed } => format!("random-{seed}"),
            other => other.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetInput {
    Preset(Preset),
    File(PathBuf),
}

impl TargetInput {
    fn slug(&self) -> String {
        match self {
            TargetInput::Preset(p) => p.slug(),
            TargetInput::File(path) => path
                .file_stem()
                .and_then(|s| s.to_str())
                .map(|s| s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect())
                .unwrap_or_else(|| "file".into()),
        }
    }
}

/// Parses a target from text: either the JSON target schema
/// `{n_qubits, seed, re, im}` or one amplitude per line as `re [im]`
/// (whitespace or comma separated, `#` comments). Amplitudes are normalized.
pub fn parse_target_text(text: &str, source: &str) -> Result<TargetSpec> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str::<TargetSpec>(text).map_err(|e| QsnapError::Parse {
            context: format!("{source} (line {}, column {})", e.line(), e.column()),
            message: e.to_string(),
        });
    }
    let mut amps = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split([',', ' ', '\t']).filter(|f| !f.is_empty()).collect();
        if fields.len() > 2 {
            return Err(QsnapError::Parse {
                context: format!("{source} line {}", i + 1),
                message: format!("expected `re [im]`, got {} fields", fields.len()),
            });
        }
        let mut parts = [0.0; 2];
        for (k, f) in fields.iter().enumerate() {
            parts[k] = f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| QsnapError::Parse {
                context: format!("{source} line {} field {}", i + 1, k + 1),
                message: format!("'{f}' is not a finite number"),
            })?;
        }
        amps.push(Complex64::new(parts[0], parts[1]));
    }
    if amps.is_empty() {
        return Err(QsnapError::Parse { context: source.into(), message: "no amplitudes".into() });
    }
    let state = PureState::normalized(amps).map_err(|e| QsnapError::Parse { context: source.into(), message: e.to_string() })?;
    Ok(TargetSpec::pure(state, None))
}

pub fn load_target_file(path: &Path) -> Result<TargetSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| QsnapError::io(path, e))?;
    parse_target_text(&text, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructOptions {
    pub method: Method,
    pub representation: Representation,
    pub mode: FidelityMode,
    /// Optimizer seed; independent of a `random(seed)` preset.
    pub seed: u64,
    /// Register size for `random` presets.
    pub n_qubits: usize,
    pub thresholds: Vec<f64>,
    pub es: ESParams,
    pub nn: GeneratorConfig,
    /// Deposit the solution here when set.
    pub store: Option<PathBuf>,
    /// Store label; derived from the target and seed when `None`.
    pub label: Option<String>,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            method: Method::Es,
            representation: Representation::StateVector,
            mode: FidelityMode::Exact,
            seed: 0,
            n_qubits: 1,
            thresholds: vec![0.95, 0.99],
            es: ESParams::default(),
            nn: GeneratorConfig::default(),
            store: None,
            label: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructReport {
    pub target: TargetSpec,
    pub candidate: Candidate,
    /// Pure solution (dominant eigenvector for density candidates).
    pub solution: PureState,
    pub record: TrialRecord,
    pub label: Option<String>,
    pub stored_at: Option<PathBuf>,
}

/// Runs one reconstruction and optionally deposits the solution.
pub fn reconstruct(input: &TargetInput, opts: &ReconstructOptions) -> Result<ReconstructReport> {
    let target = match input {
        TargetInput::Preset(p) => p.target(opts.n_qubits)?,
        TargetInput::File(path) => load_target_file(path)?,
    };
    let shared = ExperimentConfig {
        method: opts.method,
        representation: opts.representation,
        thresholds: opts.thresholds.clone(),
        es: opts.es.clone(),
        nn: opts.nn.clone(),
        ..ExperimentConfig::default()
    };
    // Fork so the optimizer never replays the draws of a `random(seed)`
    // target with the same seed.
    let mut rng = RngStream::new(opts.seed).fork();
    let (candidate, mut record) = match opts.method {
        Method::Es => {
            let params = shared.es_params();
            params.validate()?;
            run_qeswap(&target, &params, &opts.mode, &mut rng)?
        }
        Method::Nn => {
            let config = shared.nn_config();
            config.validate()?;
            train_generator(&target, &config, &opts.mode, &mut rng)?
        }
    };
    record.seed = opts.seed;
    let solution = candidate.dominant_pure();
    let label = opts
        .store
        .as_ref()
        .map(|_| opts.label.clone().unwrap_or_else(|| format!("{}-{}-s{}", input.slug(), opts.method, opts.seed)));
    let stored_at = match (&opts.store, &label) {
        (Some(dir), Some(label)) => {
            let provenance = Provenance { method: record.method.clone(), seed: opts.seed, fidelity: record.final_fidelity };
            Some(SnapshotStore::open(dir)?.put(label, &solution, Some(provenance))?)
        }
        _ => None,
    };
    Ok(ReconstructReport { target, candidate, solution, record, label, stored_at })
}
