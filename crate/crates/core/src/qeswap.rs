//! QESwap: a plain evolution strategy that treats the SWAP-test fidelity as
//! a black-box reward.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QsnapError, Result};
use crate::objective::{decode_candidate, Candidate, Evaluator, FidelityMode, Objective};
use crate::record::{best_so_far, threshold_hits, TrialRecord};
use crate::rng::RngStream;
use crate::stateprep::{Representation, TargetSpec};

/// Attempts at redrawing a vector that decodes to a degenerate candidate.
const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ESParams {
    pub population: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub max_iters: usize,
    pub thresholds: Vec<f64>,
    pub representation: Representation,
    pub advantage_epsilon: f64,
    pub objective: Objective,
}

impl Default for ESParams {
    fn default() -> Self {
        ESParams {
            population: 50,
            sigma: 0.1,
            alpha: 0.05,
            max_iters: 100,
            thresholds: vec![0.95, 0.99],
            representation: Representation::StateVector,
            advantage_epsilon: 1e-8,
            objective: Objective::SwapTest,
        }
    }
}

impl ESParams {
    pub fn with_representation(mut self, representation: Representation) -> Self {
        self.representation = representation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(QsnapError::Config(format!("population {} must be at least 2", self.population)));
        }
        if !(self.sigma > 0.0) || !(self.alpha > 0.0) || !(self.advantage_epsilon >= 0.0) {
            return Err(QsnapError::Config("sigma and alpha must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(QsnapError::Config("max_iters must be at least 1".into()));
        }
        validate_thresholds(&self.thresholds)
    }

    /// The threshold that ends a run.
    pub fn stop_threshold(&self) -> f64 {
        self.thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(QsnapError::Config("at least one threshold is required".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(QsnapError::Config(format!("threshold {t} outside (0, 1]")));
    }
    Ok(())
}

/// One population member: the noise direction and the perturbed vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

fn gaussian(len: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

fn perturb(w: &[f64], sigma: f64, rng: &mut RngStream) -> Perturbation {
    let z = gaussian(w.len(), rng);
    let w = w.iter().zip(&z).map(|(a, b)| a + sigma * b).collect();
    Perturbation { z, w }
}

/// `N` pairs `(z_i, w + sigma z_i)` with `z_i` standard normal.
pub fn perturb_population(w: &[f64], params: &ESParams, rng: &mut RngStream) -> Vec<Perturbation> {
    (0..params.population).map(|_| perturb(w, params.sigma, rng)).collect()
}

/// `(F_i - mean F) / (std F + epsilon)` with the population standard
/// deviation.
pub fn standardized_advantages(fidelities: &[f64], epsilon: f64) -> Vec<f64> {
    let n = fidelities.len() as f64;
    if fidelities.is_empty() {
        return Vec::new();
    }
    // The rounded mean of equal values can differ from them by an ulp.
    if fidelities.iter().all(|f| *f == fidelities[0]) {
        return vec![0.0; fidelities.len()];
    }
    let mean = fidelities.iter().sum::<f64>() / n;
    let var = fidelities.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return vec![0.0; fidelities.len()];
    }
    fidelities.iter().map(|f| (f - mean) / (std + epsilon)).collect()
}

/// `w + alpha / (N sigma) sum_i A_i z_i`.
pub fn es_update(w: &[f64], pairs: &[Perturbation], advantages: &[f64], params: &ESParams) -> Result<Vec<f64>> {
    if pairs.len() != advantages.len() {
        return Err(QsnapError::DimensionMismatch { expected: pairs.len(), got: advantages.len() });
    }
    if let Some(p) = pairs.iter().find(|p| p.z.len() != w.len()) {
        return Err(QsnapError::DimensionMismatch { expected: w.len(), got: p.z.len() });
    }
    let scale = params.alpha / (pairs.len() as f64 * params.sigma);
    let mut out = w.to_vec();
    for (p, a) in pairs.iter().zip(advantages) {
        if *a == 0.0 {
            continue;
        }
        out.iter_mut().zip(&p.z).for_each(|(o, z)| *o += scale * a * z);
    }
    Ok(out)
}

/// Runs QESwap from a standard-normal starting vector.
pub fn run_qeswap(
    target: &TargetSpec,
    params: &ESParams,
    mode: &FidelityMode,
    rng: &mut RngStream,
) -> Result<(Candidate, TrialRecord)> {
    let len = params.representation.param_len(target.n_qubits());
    let mut w0 = gaussian(len, rng);
    let mut tries = 0;
    while decode_candidate(params.representation, &w0).is_err() {
        tries += 1;
        if tries > MAX_RESAMPLES {
            return Err(QsnapError::DegenerateCandidate("could not draw a decodable start".into()));
        }
        w0 = gaussian(len, rng);
    }
    run_qeswap_from(target, params, mode, w0, rng)
}

/// Runs QESwap from a given starting vector.
pub fn run_qeswap_from(
    target: &TargetSpec,
    params: &ESParams,
    mode: &FidelityMode,
    w0: Vec<f64>,
    rng: &mut RngStream,
) -> Result<(Candidate, TrialRecord)> {
    params.validate()?;
    let repr = params.representation;
    let expected = repr.param_len(target.n_qubits());
    if w0.len() != expected {
        return Err(QsnapError::DimensionMismatch { expected, got: w0.len() });
    }
    if let Some(x) = w0.iter().find(|x| !x.is_finite()) {
        return Err(QsnapError::NonFinite(*x));
    }
    let evaluator = Evaluator::new(target, mode, params.objective)?;
    let seed = rng.seed();
    let stop = params.stop_threshold();

    let mut w = w0;
    let mut trace = Vec::with_capacity(params.max_iters);
    let mut best: Option<(f64, Candidate)> = None;
    let mut stopped_early = false;

    for iter in 0..params.max_iters {
        let step = |w: &mut Vec<f64>, rng: &mut RngStream| -> Result<(f64, Candidate)> {
            let candidate = decode_candidate(repr, w)?;
            let f = evaluator.evaluate(&candidate, rng)?;
            Ok((f, candidate))
        };
        let (f, candidate) = step(&mut w, rng).map_err(|e| e.at_iteration(iter + 1))?;
        trace.push(f);
        if best.as_ref().is_none_or(|(b, _)| f > *b) {
            best = Some((f, candidate));
        }
        if f >= stop {
            stopped_early = true;
            break;
        }
        if iter + 1 == params.max_iters {
            break;
        }
        w = es_iteration(&w, params, &evaluator, rng).map_err(|e| e.at_iteration(iter + 1))?;
    }

    let (final_fidelity, solution) = best.expect("max_iters >= 1");
    let record = TrialRecord {
        trial_id: 0,
        seed,
        method: "es".into(),
        representation: repr,
        n_qubits: target.n_qubits(),
        mode: mode.label(),
        epochs_to_threshold: threshold_hits(&trace, &params.thresholds),
        final_fidelity,
        oracle_fidelity: evaluator.oracle(&solution)?,
        best_trace: best_so_far(&trace),
        epochs_run: trace.len(),
        fidelity_trace: trace,
        stopped_early,
        wall_time: None,
        error: None,
    };
    Ok((solution, record))
}

/// One perturb / evaluate / update step.
fn es_iteration(w: &[f64], params: &ESParams, evaluator: &Evaluator, rng: &mut RngStream) -> Result<Vec<f64>> {
    let repr = params.representation;
    let mut pairs = Vec::with_capacity(params.population);
    let mut candidates = Vec::with_capacity(params.population);
    for _ in 0..params.population {
        let mut tries = 0;
        loop {
            let p = perturb(w, params.sigma, rng);
            match decode_candidate(repr, &p.w) {
                Ok(c) => {
                    pairs.push(p);
                    candidates.push(c);
                    break;
                }
                Err(e) if tries >= MAX_RESAMPLES => return Err(e),
                Err(_) => tries += 1,
            }
        }
    }
    // Seeds are drawn sequentially so parallel evaluation stays deterministic.
    let seeds: Vec<u64> = (0..candidates.len()).map(|_| rng.next_u64()).collect();
    let fidelities: Vec<f64> = candidates
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(c, &s)| evaluator.evaluate(c, &mut RngStream::new(s)))
        .collect::<Result<_>>()?;
    let advantages = standardized_advantages(&fidelities, params.advantage_epsilon);
    es_update(w, &pairs, &advantages, params)
}
