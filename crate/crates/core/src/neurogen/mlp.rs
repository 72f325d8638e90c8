use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QsnapError, Result};
use crate::rng::RngStream;

/// Hidden-layer nonlinearity. `Identity` exists for testing the linear
/// special case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Gelu,
    Identity,
}

/// `x Phi(x)` with the exact Gaussian CDF.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => gelu(x),
            Activation::Identity => x,
        }
    }

    fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => gelu_grad(x),
            Activation::Identity => 1.0,
        }
    }
}

/// Weights, biases and Adam state of a fully connected network. Weight
/// matrices are row-major `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub adam_m_w: Vec<Vec<f64>>,
    pub adam_v_w: Vec<Vec<f64>>,
    pub adam_m_b: Vec<Vec<f64>>,
    pub adam_v_b: Vec<Vec<f64>>,
    pub step: u64,
}

/// Parameter gradients, shaped like [`MlpParams::weights`] / `biases`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Activations recorded by a forward pass: the input to each layer and
/// each layer's pre-activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

fn zeros_like(v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    v.iter().map(|x| vec![0.0; x.len()]).collect()
}

impl MlpParams {
    /// All-zero network.
    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(QsnapError::Shape(format!("invalid layer widths {widths:?}")));
        }
        let weights: Vec<Vec<f64>> = widths.windows(2).map(|p| vec![0.0; p[0] * p[1]]).collect();
        let biases: Vec<Vec<f64>> = widths[1..].iter().map(|&w| vec![0.0; w]).collect();
        Ok(MlpParams {
            widths: widths.to_vec(),
            activation,
            adam_m_w: zeros_like(&weights),
            adam_v_w: zeros_like(&weights),
            adam_m_b: zeros_like(&biases),
            adam_v_b: zeros_like(&biases),
            weights,
            biases,
            step: 0,
        })
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn init(widths: &[usize], activation: Activation, rng: &mut RngStream) -> Result<Self> {
        let mut p = Self::zeros(widths, activation)?;
        for (l, pair) in widths.windows(2).enumerate() {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            p.weights[l].iter_mut().for_each(|w| *w = rng.random_range(-bound..=bound));
            p.biases[l].iter_mut().for_each(|b| *b = rng.random_range(-bound..=bound));
        }
        Ok(p)
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    fn check_shapes(&self) -> Result<()> {
        let ok = self.widths.len() == self.weights.len() + 1
            && self.weights.len() == self.biases.len()
            && self.widths.windows(2).zip(&self.weights).all(|(p, w)| w.len() == p[0] * p[1])
            && self.widths[1..].iter().zip(&self.biases).all(|(&n, b)| b.len() == n)
            && [&self.adam_m_w, &self.adam_v_w].iter().all(|m| shapes_match(m, &self.weights))
            && [&self.adam_m_b, &self.adam_v_b].iter().all(|m| shapes_match(m, &self.biases));
        if !ok {
            return Err(QsnapError::Shape("parameter arrays do not match the layer widths".into()));
        }
        Ok(())
    }

    /// Forward pass that keeps what the backward pass needs.
    pub fn forward_cached(&self, z: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if z.len() != self.input_dim() {
            return Err(QsnapError::Shape(format!("latent length {} != input width {}", z.len(), self.input_dim())));
        }
        let last = self.n_layers() - 1;
        let mut cache = ForwardCache { inputs: Vec::with_capacity(self.n_layers()), pre: Vec::with_capacity(self.n_layers()) };
        let mut x = z.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &self.weights[l];
            let pre: Vec<f64> = (0..n_out)
                .map(|o| self.biases[l][o] + w[o * n_in..(o + 1) * n_in].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let out = if l == last { pre.clone() } else { pre.iter().map(|&v| self.activation.apply(v)).collect() };
            cache.inputs.push(std::mem::replace(&mut x, out));
            cache.pre.push(pre);
        }
        Ok((x, cache))
    }
}

fn shapes_match(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len())
}

/// Affine layers with the hidden activation between them; the last layer
/// is affine only.
pub fn mlp_forward(params: &MlpParams, z: &[f64]) -> Result<Vec<f64>> {
    Ok(params.forward_cached(z)?.0)
}

/// Reverse-mode gradients of `<output_gradient, output>` with respect to
/// every weight and bias.
pub fn mlp_backward(params: &MlpParams, cache: Option<&ForwardCache>, output_gradient: &[f64]) -> Result<Gradients> {
    let cache = cache.ok_or(QsnapError::MissingForwardCache)?;
    let layers = params.n_layers();
    if cache.inputs.len() != layers || cache.inputs.iter().zip(&params.widths).any(|(x, &w)| x.len() != w) {
        return Err(QsnapError::MissingForwardCache);
    }
    if output_gradient.len() != params.output_dim() {
        return Err(QsnapError::Shape(format!(
            "output gradient length {} != output width {}",
            output_gradient.len(),
            params.output_dim()
        )));
    }
    let mut grads = Gradients { weights: zeros_like(&params.weights), biases: zeros_like(&params.biases) };
    let mut delta = output_gradient.to_vec();
    for l in (0..layers).rev() {
        if l != layers - 1 {
            delta.iter_mut().zip(&cache.pre[l]).for_each(|(d, &p)| *d *= params.activation.grad(p));
        }
        let n_in = params.widths[l];
        let x = &cache.inputs[l];
        for (o, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                grads.weights[l][o * n_in..(o + 1) * n_in].iter_mut().zip(x).for_each(|(g, xi)| *g = d * xi);
            }
        }
        grads.biases[l].copy_from_slice(&delta);
        if l > 0 {
            let w = &params.weights[l];
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]).for_each(|(p, wi)| *p += d * wi);
                }
            }
            delta = prev;
        }
    }
    Ok(grads)
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Gradients are multiplied by this before the moment updates.
    pub scaling_factor: f64,
}

fn adam_update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], cfg: &AdamConfig, c1: f64, c2: f64) {
    for i in 0..p.len() {
        let gi = cfg.scaling_factor * g[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One bias-corrected Adam step.
pub fn adam_step(params: &mut MlpParams, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    params.check_shapes()?;
    if !shapes_match(&grads.weights, &params.weights) || !shapes_match(&grads.biases, &params.biases) {
        return Err(QsnapError::Shape("gradients do not match the parameters".into()));
    }
    params.step += 1;
    let t = params.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for l in 0..params.n_layers() {
        adam_update(&mut params.weights[l], &grads.weights[l], &mut params.adam_m_w[l], &mut params.adam_v_w[l], cfg, c1, c2);
        adam_update(&mut params.biases[l], &grads.biases[l], &mut params.adam_m_b[l], &mut params.adam_v_b[l], cfg, c1, c2);
    }
    Ok(())
}

/// Writes the full parameter and optimizer state as JSON.
pub fn save_checkpoint(params: &MlpParams, path: &Path) -> Result<()> {
    let text = serde_json::to_string(params)?;
    std::fs::write(path, text).map_err(|e| QsnapError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<MlpParams> {
    let text = std::fs::read_to_string(path).map_err(|e| QsnapError::io(path, e))?;
    let params: MlpParams = serde_json::from_str(&text)?;
    params.check_shapes()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss_and_grads(p: &MlpParams, z: &[f64], target_dir: &[f64]) -> (f64, Gradients) {
        let (out, cache) = p.forward_cached(z).unwrap();
        let loss = out.iter().zip(target_dir).map(|(a, b)| a * b).sum();
        (loss, mlp_backward(p, Some(&cache), target_dir).unwrap())
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0), 0.0);
        // 1 * Phi(1) = 0.841344746...
        assert!((gelu(1.0) - 0.841_344_746_068_543).abs() < 1e-12);
        assert!((gelu(1.0) - 0.8412).abs() < 1e-3);
        for x in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(&[8, 5, 3], Activation::Gelu).unwrap();
        assert_eq!(mlp_forward(&p, &[1.0; 8]).unwrap(), vec![0.0; 3]);
        assert!(mlp_forward(&p, &[1.0; 7]).is_err());
    }

    #[test]
    fn backward_requires_cache() {
        let p = MlpParams::zeros(&[2, 2], Activation::Gelu).unwrap();
        assert!(matches!(mlp_backward(&p, None, &[1.0, 0.0]), Err(QsnapError::MissingForwardCache)));
        let other = MlpParams::zeros(&[3, 2], Activation::Gelu).unwrap();
        let (_, cache) = other.forward_cached(&[0.0; 3]).unwrap();
        assert!(mlp_backward(&p, Some(&cache), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let mut rng = RngStream::new(1);
        let p = MlpParams::init(&[4, 6, 3], Activation::Gelu, &mut rng).unwrap();
        let (_, g) = loss_and_grads(&p, &[0.1, 0.2, 0.3, 0.4], &[0.0; 3]);
        assert!(g.weights.iter().chain(&g.biases).flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_matches_parameter_finite_differences() {
        let mut rng = RngStream::new(2);
        let widths = [2, 2, 2, 2, 2, 2, 2];
        let p = MlpParams::init(&widths, Activation::Gelu, &mut rng).unwrap();
        let z = [0.3, -0.8];
        let dir = [0.7, -1.3];
        let (_, g) = loss_and_grads(&p, &z, &dir);
        let h = 1e-6;
        let eval = |q: &MlpParams| -> f64 { mlp_forward(q, &z).unwrap().iter().zip(&dir).map(|(a, b)| a * b).sum() };
        let mut worst: f64 = 0.0;
        for l in 0..p.n_layers() {
            for i in 0..p.weights[l].len() {
                let mut a = p.clone();
                let mut b = p.clone();
                a.weights[l][i] += h;
                b.weights[l][i] -= h;
                let fd = (eval(&a) - eval(&b)) / (2.0 * h);
                let an = g.weights[l][i];
                worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
            }
            for i in 0..p.biases[l].len() {
                let mut a = p.clone();
                let mut b = p.clone();
                a.biases[l][i] += h;
                b.biases[l][i] -= h;
                let fd = (eval(&a) - eval(&b)) / (2.0 * h);
                let an = g.biases[l][i];
                worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
            }
        }
        assert!(worst <= 1e-4, "max relative error {worst}");
    }

    #[allow(clippy::needless_range_loop)]
    #[test]
    fn linear_network_gradients_are_outer_products() {
        // y = W2 (W1 x + b1) + b2, L = <d, y>:
        //   dL/dW2 = d h^T, dL/db2 = d, dL/dW1 = (W2^T d) x^T, dL/db1 = W2^T d.
        let mut rng = RngStream::new(3);
        let p = MlpParams::init(&[3, 2, 2], Activation::Identity, &mut rng).unwrap();
        let x = [1.0, -2.0, 0.5];
        let d = [0.25, -1.0];
        let (_, g) = loss_and_grads(&p, &x, &d);
        let w1 = &p.weights[0];
        let w2 = &p.weights[1];
        let h: Vec<f64> = (0..2).map(|o| p.biases[0][o] + (0..3).map(|i| w1[o * 3 + i] * x[i]).sum::<f64>()).collect();
        let back: Vec<f64> = (0..2).map(|i| (0..2).map(|o| w2[o * 2 + i] * d[o]).sum()).collect();
        for o in 0..2 {
            for i in 0..2 {
                assert!((g.weights[1][o * 2 + i] - d[o] * h[i]).abs() < 1e-14);
            }
            assert_eq!(g.biases[1][o], d[o]);
            for i in 0..3 {
                assert!((g.weights[0][o * 3 + i] - back[o] * x[i]).abs() < 1e-14);
            }
            assert!((g.biases[0][o] - back[o]).abs() < 1e-14);
        }
    }

    fn cfg() -> AdamConfig {
        AdamConfig { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, scaling_factor: 100.0 }
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut rng = RngStream::new(4);
        let mut p = MlpParams::init(&[3, 4, 2], Activation::Gelu, &mut rng).unwrap();
        let before = p.clone();
        let zero = Gradients { weights: zeros_like(&p.weights), biases: zeros_like(&p.biases) };
        adam_step(&mut p, &zero, &cfg()).unwrap();
        assert_eq!(p.weights, before.weights);
        assert_eq!(p.biases, before.biases);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = MlpParams::zeros(&[2, 2], Activation::Gelu).unwrap();
        let g = Gradients { weights: vec![vec![0.5, -2.0, 1e-3, -7.0]], biases: vec![vec![3.0, -0.1]] };
        adam_step(&mut p, &g, &cfg()).unwrap();
        for (w, gw) in p.weights[0].iter().zip(&g.weights[0]) {
            assert!((w + 1e-4 * gw.signum()).abs() < 1e-9);
        }
        for (b, gb) in p.biases[0].iter().zip(&g.biases[0]) {
            assert!((b + 1e-4 * gb.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn adam_second_identical_step_is_no_larger_than_first() {
        // With a constant gradient the bias-corrected ratio stays 1, so each
        // step equals lr exactly; plain SGD with the same lr and the scaled
        // gradient would move 100 * |g| * lr.
        let mut p = MlpParams::zeros(&[1, 1], Activation::Gelu).unwrap();
        let g = Gradients { weights: vec![vec![0.2]], biases: vec![vec![0.0]] };
        adam_step(&mut p, &g, &cfg()).unwrap();
        let first = p.weights[0][0].abs();
        adam_step(&mut p, &g, &cfg()).unwrap();
        let second = (p.weights[0][0].abs() - first).abs();
        let sgd = cfg().learning_rate * cfg().scaling_factor * 0.2;
        assert!(second <= first + 1e-15);
        assert!(second < sgd);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = RngStream::new(5);
        let mut p = MlpParams::init(&[5, 7, 3], Activation::Gelu, &mut rng).unwrap();
        let (_, g) = loss_and_grads(&p, &[0.1, 0.2, 0.3, 0.4, 0.5], &[1.0, -1.0, 0.5]);
        adam_step(&mut p, &g, &cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&p, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, p);
        let bits = |m: &MlpParams| m.weights.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&p));
    }
}
