//! Neural generator: an MLP maps a latent vector to a candidate state and is
//! trained with Adam on `1 - F`, where the gradient with respect to the raw
//! output comes from symmetric finite differences through the SWAP test.

mod mlp;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use mlp::{
    adam_step, gelu, load_checkpoint, mlp_backward, mlp_forward, save_checkpoint, Activation, AdamConfig,
    ForwardCache, Gradients, MlpParams,
};

use crate::error::{QsnapError, Result};
use crate::objective::{decode_candidate, Candidate, Evaluator, FidelityMode, Objective};
use crate::qeswap::validate_thresholds;
use crate::record::{best_so_far, threshold_hits, TrialRecord};
use crate::rng::RngStream;
use crate::stateprep::{Representation, TargetSpec};

/// Whether the latent input is redrawn every epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentMode {
    #[default]
    Resample,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub latent_dim: usize,
    /// Widths between the latent input and the output layer.
    pub hidden_widths: Vec<usize>,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_epsilon: f64,
    /// Step on the raw output for the symmetric differences.
    pub fd_epsilon: f64,
    pub scaling_factor: f64,
    pub max_epochs: usize,
    pub latent_mode: LatentMode,
    pub stop_threshold: f64,
    pub thresholds: Vec<f64>,
    pub representation: Representation,
    pub objective: Objective,
}

pub const WEIGHT_LAYERS: usize = 6;

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            latent_dim: 256,
            hidden_widths: vec![512, 512, 256, 128, 64],
            learning_rate: 1e-4,
            adam_betas: (0.9, 0.999),
            adam_epsilon: 1e-8,
            fd_epsilon: 1e-3,
            scaling_factor: 100.0,
            max_epochs: 500,
            latent_mode: LatentMode::Resample,
            stop_threshold: 0.999,
            thresholds: vec![0.95, 0.99],
            representation: Representation::StateVector,
            objective: Objective::SwapTest,
        }
    }
}

impl GeneratorConfig {
    /// Full width list `[latent, hidden..., output]` for `n_qubits`.
    pub fn layer_widths(&self, n_qubits: usize) -> Vec<usize> {
        let mut w = vec![self.latent_dim];
        w.extend(&self.hidden_widths);
        w.push(self.representation.param_len(n_qubits));
        w
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_betas.0,
            beta2: self.adam_betas.1,
            epsilon: self.adam_epsilon,
            scaling_factor: self.scaling_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.len() + 1 != WEIGHT_LAYERS {
            return Err(QsnapError::Config(format!(
                "generator needs exactly {WEIGHT_LAYERS} weight layers, got {}",
                self.hidden_widths.len() + 1
            )));
        }
        if self.latent_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(QsnapError::Config("layer widths must be positive".into()));
        }
        if !(self.fd_epsilon > 0.0) || !(self.learning_rate > 0.0) || !(self.scaling_factor > 0.0) {
            return Err(QsnapError::Config("fd_epsilon, learning_rate and scaling_factor must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(QsnapError::Config("max_epochs must be at least 1".into()));
        }
        validate_thresholds(&self.thresholds)?;
        validate_thresholds(&[self.stop_threshold])
    }
}

/// Symmetric finite differences where the callback also receives the probe
/// index (`2k` for `+eps e_k`, `2k + 1` for `-eps e_k`). Probes run in
/// parallel.
pub fn fd_gradient_indexed<F>(loss_at: F, raw: &[f64], fd_epsilon: f64) -> Result<Vec<f64>>
where
    F: Fn(usize, &[f64]) -> Result<f64> + Sync,
{
    if !(fd_epsilon > 0.0) {
        return Err(QsnapError::InvalidParameter(format!("fd_epsilon {fd_epsilon} must be positive")));
    }
    (0..raw.len())
        .into_par_iter()
        .map(|k| {
            let mut probe = raw.to_vec();
            probe[k] = raw[k] + fd_epsilon;
            let up = loss_at(2 * k, &probe)?;
            probe[k] = raw[k] - fd_epsilon;
            let down = loss_at(2 * k + 1, &probe)?;
            for v in [up, down] {
                if !v.is_finite() {
                    return Err(QsnapError::NonFinite(v));
                }
            }
            Ok((up - down) / (2.0 * fd_epsilon))
        })
        .collect()
}

/// `g_k = (L(x + eps e_k) - L(x - eps e_k)) / (2 eps)`.
pub fn fd_gradient<F>(loss_at: F, raw: &[f64], fd_epsilon: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    fd_gradient_indexed(|_, x| loss_at(x), raw, fd_epsilon)
}

fn uniform_latent(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

/// Trains a fresh generator.
pub fn train_generator(
    target: &TargetSpec,
    config: &GeneratorConfig,
    mode: &FidelityMode,
    rng: &mut RngStream,
) -> Result<(Candidate, TrialRecord)> {
    let (c, r, _) = train_generator_full(target, config, mode, None, rng)?;
    Ok((c, r))
}

/// Trains from `initial` (or a fresh initialization) and also returns the
/// final network.
pub fn train_generator_full(
    target: &TargetSpec,
    config: &GeneratorConfig,
    mode: &FidelityMode,
    initial: Option<MlpParams>,
    rng: &mut RngStream,
) -> Result<(Candidate, TrialRecord, MlpParams)> {
    config.validate()?;
    let seed = rng.seed();
    let n = target.n_qubits();
    let widths = config.layer_widths(n);
    let mut params = match initial {
        Some(p) if p.widths == widths => p,
        Some(p) => return Err(QsnapError::Shape(format!("network widths {:?} != {:?}", p.widths, widths))),
        None => MlpParams::init(&widths, Activation::Gelu, rng)?,
    };
    let evaluator = Evaluator::new(target, mode, config.objective)?;
    let repr = config.representation;
    let adam = config.adam();
    let fixed_latent = match config.latent_mode {
        LatentMode::Fixed => Some(uniform_latent(config.latent_dim, rng)),
        LatentMode::Resample => None,
    };

    let mut trace = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(f64, Candidate)> = None;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let mut step = || -> Result<bool> {
            let z = match &fixed_latent {
                Some(z) => z.clone(),
                None => uniform_latent(config.latent_dim, rng),
            };
            let (raw, cache) = params.forward_cached(&z)?;
            let candidate = decode_candidate(repr, &raw)?;
            let f = evaluator.evaluate(&candidate, rng)?;
            trace.push(f);
            if best.as_ref().is_none_or(|(b, _)| f > *b) {
                best = Some((f, candidate));
            }
            if f >= config.stop_threshold {
                return Ok(true);
            }
            if epoch == config.max_epochs {
                return Ok(false);
            }
            let seeds: Vec<u64> = (0..2 * raw.len()).map(|_| rng.next_u64()).collect();
            let grad = fd_gradient_indexed(
                |probe, x| {
                    let c = decode_candidate(repr, x)?;
                    Ok(1.0 - evaluator.evaluate(&c, &mut RngStream::new(seeds[probe]))?)
                },
                &raw,
                config.fd_epsilon,
            )?;
            let grads = mlp_backward(&params, Some(&cache), &grad)?;
            adam_step(&mut params, &grads, &adam)?;
            Ok(false)
        };
        if step().map_err(|e| e.at_iteration(epoch))? {
            stopped_early = true;
            break;
        }
    }

    let (final_fidelity, solution) = best.expect("max_epochs >= 1");
    let record = TrialRecord {
        trial_id: 0,
        seed,
        method: "nn".into(),
        representation: repr,
        n_qubits: n,
        mode: mode.label(),
        epochs_to_threshold: threshold_hits(&trace, &config.thresholds),
        final_fidelity,
        oracle_fidelity: evaluator.oracle(&solution)?,
        best_trace: best_so_far(&trace),
        epochs_run: trace.len(),
        fidelity_trace: trace,
        stopped_early,
        wall_time: None,
        error: None,
    };
    Ok((solution, record, params))
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::*;
    use crate::simcore::PureState;
    use crate::stateprep::{decode_statevector, sample_random_state};
    use crate::swaptest::{fidelity_oracle, swap_test_exact};

    /// d/d(raw) of `1 - |<phi|v>|^2 / |v|^2` with `v = re + i im`.
    fn analytic_gradient(phi: &PureState, raw: &[f64]) -> Vec<f64> {
        let d = raw.len() / 2;
        let v: Vec<Complex64> = (0..d).map(|k| Complex64::new(raw[k], raw[d + k])).collect();
        let c: Complex64 = phi.amplitudes().iter().zip(&v).map(|(p, x)| p.conj() * x).sum();
        let nv: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        let overlap = c.norm_sqr();
        let mut g = vec![0.0; 2 * d];
        for k in 0..d {
            let dc_re = phi.amplitudes()[k].conj();
            let dc_im = Complex64::i() * phi.amplitudes()[k].conj();
            let d_re = 2.0 * (c.conj() * dc_re).re;
            let d_im = 2.0 * (c.conj() * dc_im).re;
            g[k] = -(d_re * nv - overlap * 2.0 * v[k].re) / (nv * nv);
            g[d + k] = -(d_im * nv - overlap * 2.0 * v[k].im) / (nv * nv);
        }
        g
    }

    #[test]
    fn fd_examples() {
        let g = fd_gradient(|x| Ok(x.iter().map(|v| v * v).sum()), &[1.0, 0.0, 0.0], 1e-3).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && g[1].abs() < 1e-6 && g[2].abs() < 1e-6);
        let g = fd_gradient(|_| Ok(0.25), &[0.3, 0.1], 1e-3).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-12));
        assert!(matches!(fd_gradient(|_| Ok(f64::NAN), &[0.3], 1e-3), Err(QsnapError::NonFinite(_))));
        assert!(fd_gradient(|_| Ok(0.0), &[0.3], 0.0).is_err());
    }

    #[test]
    fn fd_invokes_callback_twice_per_coordinate() {
        let calls = std::sync::atomic::AtomicUsize::new(0);
        fd_gradient(
            |_| {
                calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                Ok(1.0)
            },
            &[0.0; 7],
            1e-3,
        )
        .unwrap();
        assert_eq!(calls.into_inner(), 14);
    }

    #[test]
    fn fd_through_swap_matches_analytic_gradient() {
        let mut rng = RngStream::new(11);
        for case in 0..20 {
            let n = 1 + case % 2;
            let phi = sample_random_state(n, &mut rng).unwrap();
            let raw: Vec<f64> = (0..2 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fd = fd_gradient(
                |x| Ok(1.0 - swap_test_exact(&phi, &decode_statevector(x)?)?.fidelity_estimate),
                &raw,
                1e-3,
            )
            .unwrap();
            let an = analytic_gradient(&phi, &raw);
            let err = fd.iter().zip(&an).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-5, "case {case}: {err}");
            // Cross-check the oracle formula itself.
            let f = fidelity_oracle(&phi, &decode_statevector(&raw).unwrap()).unwrap();
            assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn config_validation() {
        let c = GeneratorConfig::default();
        c.validate().unwrap();
        assert_eq!(c.layer_widths(1), vec![256, 512, 512, 256, 128, 64, 4]);
        assert_eq!(c.layer_widths(2).len(), WEIGHT_LAYERS + 1);
        let bad = GeneratorConfig { hidden_widths: vec![8, 8], ..GeneratorConfig::default() };
        assert!(bad.validate().is_err());
        let u = GeneratorConfig { representation: Representation::Unitary, ..GeneratorConfig::default() };
        assert_eq!(*u.layer_widths(2).last().unwrap(), 32);
    }

    #[test]
    fn output_length_matches_representation() {
        let c = GeneratorConfig::default();
        let p = MlpParams::init(&c.layer_widths(3), Activation::Gelu, &mut RngStream::new(1)).unwrap();
        assert_eq!(mlp_forward(&p, &vec![0.5; 256]).unwrap().len(), 16);
    }

    #[test]
    fn fixed_latent_training_is_deterministic() {
        let target = TargetSpec::random(1, 2).unwrap();
        let config = GeneratorConfig { latent_mode: LatentMode::Fixed, max_epochs: 20, ..GeneratorConfig::default() };
        let (_, a) = train_generator(&target, &config, &FidelityMode::Exact, &mut RngStream::new(3)).unwrap();
        let (_, b) = train_generator(&target, &config, &FidelityMode::Exact, &mut RngStream::new(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.fidelity_trace.iter().all(|f| (-1e-10..=1.0 + 1e-10).contains(f)));
    }

    #[test]
    fn degenerate_target_converges() {
        let target = TargetSpec::pure(PureState::zero(1), None);
        let (_, rec) = train_generator(&target, &GeneratorConfig::default(), &FidelityMode::Exact, &mut RngStream::new(4)).unwrap();
        assert!(rec.stopped_early, "trace tail {:?}", rec.fidelity_trace.last());
        let e = rec.epochs_run;
        assert!(rec.fidelity_trace[e - 1] >= 0.999);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn loss_stays_in_unit_interval(seed in 0u64..1000, noisy in proptest::bool::ANY) {
            let mut rng = RngStream::new(seed);
            let target = TargetSpec::random(1, seed).unwrap();
            let mode = if noisy {
                FidelityMode::Noisy { noise: crate::noise::default_noise_model(), shots: Some(64) }
            } else {
                FidelityMode::Sampled { shots: 64 }
            };
            let ev = Evaluator::new(&target, &mode, Objective::SwapTest).unwrap();
            let raw: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let loss = 1.0 - ev.evaluate(&decode_candidate(Representation::StateVector, &raw).unwrap(), &mut rng).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&loss), "loss {}", loss);
        }

        #[test]
        fn early_stop_means_threshold_reached(seed in 0u64..1000, stop in 0.5f64..0.95) {
            let target = TargetSpec::random(1, seed).unwrap();
            let config = GeneratorConfig { stop_threshold: stop, max_epochs: 30, ..GeneratorConfig::default() };
            let (_, rec) = train_generator(&target, &config, &FidelityMode::Exact, &mut RngStream::new(seed)).unwrap();
            if rec.stopped_early {
                proptest::prop_assert!(rec.fidelity_trace[rec.epochs_run - 1] >= stop);
                proptest::prop_assert!(rec.fidelity_trace[..rec.epochs_run - 1].iter().all(|f| *f < stop));
            } else {
                proptest::prop_assert_eq!(rec.epochs_run, 30);
            }
        }
    }
}
