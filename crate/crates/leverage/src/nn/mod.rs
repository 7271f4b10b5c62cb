//! Minimal dense feed-forward network engine: forward, backprop, Adam and
//! soft target updates. Just enough machinery for small actor/critic heads;
//! no autograd graphs, convolutions or batching tricks.

mod io;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    BadArchitecture(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("forward cache does not match this network")]
    CacheMismatch,
    #[error("non-finite gradient encountered (training divergence)")]
    NonFiniteGradient,
    #[error("checkpoint i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Softmax,
    Linear,
}

impl Activation {
    fn apply(self, z: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self {
            Activation::Relu => out.extend(z.iter().map(|&v| v.max(0.0))),
            Activation::Tanh => out.extend(z.iter().map(|&v| v.tanh())),
            Activation::Linear => out.extend_from_slice(z),
            Activation::Softmax => {
                let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                out.extend(z.iter().map(|&v| (v - max).exp()));
                let sum: f64 = out.iter().sum();
                for v in out.iter_mut() {
                    *v /= sum;
                }
            }
        }
    }

    /// dL/dz from (z, y, dL/dy).
    fn backward(self, z: &[f64], y: &[f64], dy: &[f64], dz: &mut Vec<f64>) {
        dz.clear();
        match self {
            Activation::Relu => {
                dz.extend(z.iter().zip(dy).map(|(&zi, &g)| if zi > 0.0 { g } else { 0.0 }))
            }
            Activation::Tanh => dz.extend(y.iter().zip(dy).map(|(&yi, &g)| g * (1.0 - yi * yi))),
            Activation::Linear => dz.extend_from_slice(dy),
            Activation::Softmax => {
                let dot: f64 = y.iter().zip(dy).map(|(&yi, &g)| yi * g).sum();
                dz.extend(y.iter().zip(dy).map(|(&yi, &g)| yi * (g - dot)));
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Layer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    /// Row-major (out_dim, in_dim).
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Moments {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
}

/// A dense multi-layer perceptron with per-parameter Adam state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    moments: Vec<Moments>,
    step: u64,
}

/// Activation trace of one forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// activations[0] is the input; activations[i+1] the output of layer i.
    activations: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

/// Gradients of a scalar w.r.t. every parameter and w.r.t. the input vector.
/// The input gradient is what the deterministic policy gradient needs when
/// the action is part of the critic input.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
    pub d_input: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        GradientSet {
            d_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            d_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            d_input: vec![0.0; net.layers[0].in_dim],
        }
    }

    /// Element-wise accumulation; shapes must agree.
    pub fn add(&mut self, other: &GradientSet) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.d_input.iter_mut().zip(&other.d_input) {
            *x += y;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in self.d_weights.iter_mut().chain(self.d_biases.iter_mut()) {
            for x in a.iter_mut() {
                *x *= k;
            }
        }
        for x in self.d_input.iter_mut() {
            *x *= k;
        }
    }

    fn is_finite(&self) -> bool {
        self.d_weights
            .iter()
            .chain(self.d_biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

impl Network {
    /// Builds an MLP with the given layer sizes. Hidden layers use
    /// `hidden_activation`, the last layer `output_activation`. Parameters
    /// are drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); equal seeds
    /// give identical networks.
    pub fn mlp(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(NnError::BadArchitecture(format!(
                "need at least 2 layer sizes, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(NnError::BadArchitecture("zero-width layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut moments = Vec::new();
        let n_layers = layer_sizes.len() - 1;
        for i in 0..n_layers {
            let (in_dim, out_dim) = (layer_sizes[i], layer_sizes[i + 1]);
            let bound = 1.0 / (in_dim as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let weights: Vec<f64> = (0..in_dim * out_dim).map(|_| dist.sample(&mut rng)).collect();
            let biases: Vec<f64> = (0..out_dim).map(|_| dist.sample(&mut rng)).collect();
            let activation = if i + 1 == n_layers { output_activation } else { hidden_activation };
            moments.push(Moments {
                m_w: vec![0.0; weights.len()],
                v_w: vec![0.0; weights.len()],
                m_b: vec![0.0; biases.len()],
                v_b: vec![0.0; biases.len()],
            });
            layers.push(Layer { in_dim, out_dim, activation, weights, biases });
        }
        Ok(Network { layers, moments, step: 0 })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].in_dim];
        sizes.extend(self.layers.iter().map(|l| l.out_dim));
        sizes
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Flattens all parameters (per layer: weights row-major, then biases).
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    /// Inverse of [`Network::flatten_params`]. Optimizer moments are kept.
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(NnError::DimensionMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Zeroes one layer's weights and biases. Handy for tests and for
    /// policies that must start exactly neutral (tanh(0) = 0).
    pub fn zero_layer(&mut self, idx: usize) {
        let l = &mut self.layers[idx];
        l.weights.iter_mut().for_each(|w| *w = 0.0);
        l.biases.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    fn same_architecture(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim && a.activation == b.activation)
    }

    /// Forward pass; returns the output and the activation trace needed by
    /// [`Network::backward`].
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch { expected: self.input_dim(), got: input.len() });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut preacts = Vec::with_capacity(self.layers.len());
        activations.push(input.to_vec());
        for l in &self.layers {
            let x = activations.last().unwrap();
            let mut z = vec![0.0; l.out_dim];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &l.weights[o * l.in_dim..(o + 1) * l.in_dim];
                let mut acc = l.biases[o];
                for (w, xi) in row.iter().zip(x) {
                    acc += w * xi;
                }
                *zo = acc;
            }
            let mut y = Vec::new();
            l.activation.apply(&z, &mut y);
            preacts.push(z);
            activations.push(y);
        }
        let output = activations.last().unwrap().clone();
        Ok((output, ForwardCache { activations, preacts }))
    }

    /// Convenience forward that discards the cache.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    /// Backpropagates `output_grad` (dL/d output) through the cached pass,
    /// returning parameter gradients and the input gradient.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<GradientSet> {
        if cache.activations.len() != self.layers.len() + 1
            || cache
                .activations
                .iter()
                .zip(self.layer_sizes())
                .any(|(a, s)| a.len() != s)
        {
            return Err(NnError::CacheMismatch);
        }
        if output_grad.len() != self.output_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.output_dim(),
                got: output_grad.len(),
            });
        }
        let mut grads = GradientSet::zeros_like(self);
        let mut dy = output_grad.to_vec();
        let mut dz = Vec::new();
        for (i, l) in self.layers.iter().enumerate().rev() {
            l.activation.backward(&cache.preacts[i], &cache.activations[i + 1], &dy, &mut dz);
            let x = &cache.activations[i];
            let dw = &mut grads.d_weights[i];
            let db = &mut grads.d_biases[i];
            let mut dx = vec![0.0; l.in_dim];
            for (o, &dzo) in dz.iter().enumerate() {
                db[o] = dzo;
                let row = o * l.in_dim;
                let wrow = &l.weights[row..row + l.in_dim];
                for (j, (&xi, &w)) in x.iter().zip(wrow).enumerate() {
                    dw[row + j] = dzo * xi;
                    dx[j] += dzo * w;
                }
            }
            if i == 0 {
                grads.d_input = dx;
            } else {
                dy = dx;
            }
        }
        Ok(grads)
    }

    /// One Adam step (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) on
    /// `grads + l2_coeff * param`. The L2 term is folded into the gradient,
    /// not decoupled. Errors on non-finite gradients.
    pub fn adam_step(&mut self, grads: &GradientSet, lr: f64, l2_coeff: f64) -> Result<()> {
        if grads.d_weights.len() != self.layers.len() {
            return Err(NnError::CacheMismatch);
        }
        if !grads.is_finite() {
            return Err(NnError::NonFiniteGradient);
        }
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        for (l, (mom, (dw, db))) in self
            .layers
            .iter_mut()
            .zip(self.moments.iter_mut().zip(grads.d_weights.iter().zip(&grads.d_biases)))
        {
            if dw.len() != l.weights.len() || db.len() != l.biases.len() {
                return Err(NnError::CacheMismatch);
            }
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                let g = g + l2_coeff * *p;
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + EPS);
            };
            for ((p, &g), (m, v)) in l
                .weights
                .iter_mut()
                .zip(dw)
                .zip(mom.m_w.iter_mut().zip(mom.v_w.iter_mut()))
            {
                update(p, g, m, v);
            }
            for ((p, &g), (m, v)) in l
                .biases
                .iter_mut()
                .zip(db)
                .zip(mom.m_b.iter_mut().zip(mom.v_b.iter_mut()))
            {
                update(p, g, m, v);
            }
        }
        Ok(())
    }

    /// Polyak update: every parameter of `self` becomes
    /// `tau * source + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, source: &Network, tau: f64) -> Result<()> {
        if !self.same_architecture(source) {
            return Err(NnError::BadArchitecture("target/source architecture mismatch".into()));
        }
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            for (tp, sp) in t.weights.iter_mut().zip(&s.weights) {
                *tp = tau * sp + (1.0 - tau) * *tp;
            }
            for (tp, sp) in t.biases.iter_mut().zip(&s.biases) {
                *tp = tau * sp + (1.0 - tau) * *tp;
            }
        }
        Ok(())
    }
}

/// Worst relative error between analytic gradients and central finite
/// differences of the scalarization `f = sum(outputs)`, over all parameters
/// and input coordinates.
///
/// Coordinates whose perturbed (or base) forward pass puts a relu
/// preactivation within the kink band `10 * eps` of zero are skipped: the
/// subgradient there is not comparable against a two-sided difference.
pub fn finite_diff_check(net: &Network, input: &[f64], eps: f64) -> Result<f64> {
    let (_, cache) = net.forward(input)?;
    let ones = vec![1.0; net.output_dim()];
    let grads = net.backward(&cache, &ones)?;
    let kink_band = 10.0 * eps;

    let near_kink = |n: &Network, x: &[f64]| -> Result<(f64, bool)> {
        let (out, cache) = n.forward(x)?;
        let f: f64 = out.iter().sum();
        let mut near = false;
        for (l, z) in n.layers.iter().zip(&cache.preacts) {
            if l.activation == Activation::Relu && z.iter().any(|&v| v.abs() <= kink_band) {
                near = true;
            }
        }
        Ok((f, near))
    };

    let (_, base_near) = near_kink(net, input)?;
    let mut worst = 0.0_f64;

    let mut check = |analytic: f64, plus: (f64, bool), minus: (f64, bool)| {
        if base_near || plus.1 || minus.1 {
            return;
        }
        let numeric = (plus.0 - minus.0) / (2.0 * eps);
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
        worst = worst.max(err);
    };

    // Parameters.
    let flat = net.flatten_params();
    let mut probe = net.clone();
    let analytic_flat: Vec<f64> = grads
        .d_weights
        .iter()
        .zip(&grads.d_biases)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).cloned().collect::<Vec<f64>>())
        .collect();
    for i in 0..flat.len() {
        let mut bumped = flat.clone();
        bumped[i] = flat[i] + eps;
        probe.set_params(&bumped)?;
        let plus = near_kink(&probe, input)?;
        bumped[i] = flat[i] - eps;
        probe.set_params(&bumped)?;
        let minus = near_kink(&probe, input)?;
        check(analytic_flat[i], plus, minus);
    }
    probe.set_params(&flat)?;

    // Input coordinates.
    let mut x = input.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = near_kink(net, &x)?;
        x[i] = orig - eps;
        let minus = near_kink(net, &x)?;
        x[i] = orig;
        check(grads.d_input[i], plus, minus);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn linear_1x1(w: f64, b: f64) -> Network {
        let mut net = Network::mlp(&[1, 1], Activation::Linear, Activation::Linear, 0).unwrap();
        net.set_params(&[w, b]).unwrap();
        net
    }

    #[test]
    fn mlp_rejects_bad_sizes() {
        assert!(Network::mlp(&[4], Activation::Relu, Activation::Tanh, 0).is_err());
        assert!(Network::mlp(&[4, 0, 2], Activation::Relu, Activation::Tanh, 0).is_err());
    }

    #[test]
    fn same_seed_means_identical_networks() {
        let a = Network::mlp(&[10, 100, 50, 1], Activation::Relu, Activation::Tanh, 42).unwrap();
        let b = Network::mlp(&[10, 100, 50, 1], Activation::Relu, Activation::Tanh, 42).unwrap();
        assert_eq!(a.flatten_params(), b.flatten_params());
        let c = Network::mlp(&[10, 100, 50, 1], Activation::Relu, Activation::Tanh, 43).unwrap();
        assert_ne!(a.flatten_params(), c.flatten_params());
    }

    #[test]
    fn critic_shaped_architecture() {
        let net = Network::mlp(&[10, 100, 50, 1], Activation::Relu, Activation::Tanh, 1).unwrap();
        assert_eq!(net.layer_sizes(), vec![10, 100, 50, 1]);
        assert_eq!(
            net.activations(),
            vec![Activation::Relu, Activation::Relu, Activation::Tanh]
        );
    }

    #[test]
    fn linear_forward_is_affine() {
        let net = linear_1x1(2.0, 1.0);
        let (out, _) = net.forward(&[3.0]).unwrap();
        assert_eq!(out, vec![7.0]);
    }

    #[test]
    fn relu_zeroes_negative_preactivations() {
        let mut net = Network::mlp(&[2, 3], Activation::Relu, Activation::Relu, 5).unwrap();
        let flat: Vec<f64> = net.flatten_params().iter().map(|w| -w.abs() - 0.1).collect();
        net.set_params(&flat).unwrap();
        let (out, _) = net.forward(&[1.0, 2.0]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn softmax_symmetry_and_normalization() {
        let mut net = Network::mlp(&[2, 2], Activation::Linear, Activation::Softmax, 3).unwrap();
        net.zero_layer(0);
        let (out, _) = net.forward(&[5.0, -1.0]).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-12);
        assert!((out[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = linear_1x1(1.0, 0.0);
        assert!(net.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn backward_linear_matches_affine_derivative() {
        let net = linear_1x1(2.0, 1.0);
        let (_, cache) = net.forward(&[3.0]).unwrap();
        let g = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(g.d_weights[0], vec![3.0]);
        assert_eq!(g.d_biases[0], vec![1.0]);
        assert_eq!(g.d_input, vec![2.0]);
    }

    #[test]
    fn backward_zero_output_grad_gives_zero_gradients() {
        let net = Network::mlp(&[4, 8, 2], Activation::Tanh, Activation::Linear, 9).unwrap();
        let (_, cache) = net.forward(&[0.1, -0.2, 0.3, 0.7]).unwrap();
        let g = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(g.d_weights.iter().all(|v| v.iter().all(|&x| x == 0.0)));
        assert!(g.d_biases.iter().all(|v| v.iter().all(|&x| x == 0.0)));
        assert!(g.d_input.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_rejects_mismatched_cache() {
        let a = Network::mlp(&[3, 4, 2], Activation::Relu, Activation::Linear, 1).unwrap();
        let b = Network::mlp(&[3, 5, 2], Activation::Relu, Activation::Linear, 1).unwrap();
        let (_, cache) = a.forward(&[0.1, 0.2, 0.3]).unwrap();
        assert!(b.backward(&cache, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let net = Network::mlp(&[4, 8, 2], Activation::Relu, Activation::Tanh, 17).unwrap();
        let input: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = finite_diff_check(&net, &input, 1e-5).unwrap();
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn finite_diff_exact_for_linear_nets() {
        let net = Network::mlp(&[3, 3, 2], Activation::Linear, Activation::Linear, 2).unwrap();
        let err = finite_diff_check(&net, &[0.5, -0.25, 1.5], 1e-5).unwrap();
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn finite_diff_skips_relu_kinks() {
        // One relu unit sitting exactly on its kink: the check must not
        // report a spurious error for that coordinate.
        let mut net = Network::mlp(&[1, 1, 1], Activation::Relu, Activation::Linear, 0).unwrap();
        net.set_params(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        let err = finite_diff_check(&net, &[0.0], 1e-5).unwrap();
        assert!(err < 1e-9, "kink coordinate should be excluded, got {err}");
    }

    #[test]
    fn adam_first_step_is_minus_lr() {
        let mut net = linear_1x1(0.0, 0.0);
        let g = GradientSet {
            d_weights: vec![vec![1.0]],
            d_biases: vec![vec![0.0]],
            d_input: vec![0.0],
        };
        net.adam_step(&g, 0.001, 0.0).unwrap();
        let w = net.flatten_params()[0];
        assert!((w + 0.001).abs() < 1e-9, "w = {w}");
        assert_eq!(net.step_count(), 1);
    }

    #[test]
    fn l2_decays_weights_with_zero_gradient() {
        let mut net = linear_1x1(1.0, 0.0);
        let g = GradientSet {
            d_weights: vec![vec![0.0]],
            d_biases: vec![vec![0.0]],
            d_input: vec![0.0],
        };
        net.adam_step(&g, 0.001, 0.01).unwrap();
        assert!(net.flatten_params()[0] < 1.0);
    }

    #[test]
    fn zero_grad_zero_l2_leaves_parameters_unchanged() {
        let mut net = Network::mlp(&[3, 4, 1], Activation::Relu, Activation::Linear, 11).unwrap();
        let before = net.flatten_params();
        let g = GradientSet::zeros_like(&net);
        net.adam_step(&g, 0.01, 0.0).unwrap();
        assert_eq!(net.flatten_params(), before);
        assert_eq!(net.step_count(), 1);
    }

    #[test]
    fn nan_gradient_is_a_divergence_error() {
        let mut net = linear_1x1(1.0, 0.0);
        let g = GradientSet {
            d_weights: vec![vec![f64::NAN]],
            d_biases: vec![vec![0.0]],
            d_input: vec![0.0],
        };
        assert!(matches!(net.adam_step(&g, 0.001, 0.0), Err(NnError::NonFiniteGradient)));
    }

    #[test]
    fn soft_update_endpoints_and_paper_value() {
        let src = Network::mlp(&[2, 3, 1], Activation::Relu, Activation::Linear, 1).unwrap();
        let mut tgt = Network::mlp(&[2, 3, 1], Activation::Relu, Activation::Linear, 2).unwrap();

        let mut full = tgt.clone();
        full.soft_update_from(&src, 1.0).unwrap();
        assert_eq!(full.flatten_params(), src.flatten_params());

        let before = tgt.flatten_params();
        tgt.soft_update_from(&src, 0.0).unwrap();
        assert_eq!(tgt.flatten_params(), before);

        let mut zero = src.clone();
        let n = zero.param_count();
        zero.set_params(&vec![0.0; n]).unwrap();
        let mut ones = src.clone();
        ones.set_params(&vec![1.0; n]).unwrap();
        zero.soft_update_from(&ones, 0.01).unwrap();
        assert!(zero.flatten_params().iter().all(|&p| (p - 0.01).abs() < 1e-15));
    }

    #[test]
    fn soft_update_rejects_architecture_mismatch() {
        let src = Network::mlp(&[2, 3, 1], Activation::Relu, Activation::Linear, 1).unwrap();
        let mut tgt = Network::mlp(&[2, 4, 1], Activation::Relu, Activation::Linear, 1).unwrap();
        assert!(tgt.soft_update_from(&src, 0.5).is_err());
    }

    #[test]
    fn repeated_soft_update_contracts_to_source() {
        let src = Network::mlp(&[3, 5, 2], Activation::Tanh, Activation::Linear, 7).unwrap();
        let mut tgt = Network::mlp(&[3, 5, 2], Activation::Tanh, Activation::Linear, 8).unwrap();
        let gap = |t: &Network| -> f64 {
            t.flatten_params()
                .iter()
                .zip(src.flatten_params())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let mut prev = gap(&tgt);
        for _ in 0..200 {
            tgt.soft_update_from(&src, 0.05).unwrap();
            let cur = gap(&tgt);
            assert!(cur <= prev * 0.951 + 1e-15);
            prev = cur;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn forward_is_pure() {
        let net = Network::mlp(&[4, 6, 3], Activation::Relu, Activation::Softmax, 3).unwrap();
        let before = net.flatten_params();
        let (a, _) = net.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let (b, _) = net.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(a, b);
        assert_eq!(net.flatten_params(), before);
    }
}
