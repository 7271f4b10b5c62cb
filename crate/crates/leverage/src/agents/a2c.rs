//! On-policy advantage actor-critic over a discretized action set: the
//! policy head emits a softmax over ten evenly spaced adjust ratios, the
//! value head regresses the bootstrapped return. No replay memory.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::AgentError;
use crate::nn::{Activation, GradientSet, Network};

pub const N_DISCRETE_ACTIONS: usize = 10;

/// The ten adjust ratios, evenly spaced over [-range, +range].
pub fn discrete_alphas(range: f64) -> Vec<f64> {
    (0..N_DISCRETE_ACTIONS)
        .map(|i| -range + 2.0 * range * i as f64 / (N_DISCRETE_ACTIONS - 1) as f64)
        .collect()
}

/// One on-policy sample: state, chosen action index, reward, successor.
#[derive(Debug, Clone, PartialEq)]
pub struct A2cSample {
    pub state: Vec<f64>,
    pub action_idx: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct A2cConfig {
    pub state_dim: usize,
    pub hidden: Vec<usize>,
    pub range: f64,
    pub gamma: f64,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub entropy_coeff: f64,
    pub reward_scale: f64,
    /// Global gradient-norm clip for both heads; on-policy batches are
    /// small and occasionally spiky.
    pub grad_clip: f64,
}

impl A2cConfig {
    pub fn new(state_dim: usize, range: f64, gamma: f64) -> Self {
        A2cConfig {
            state_dim,
            hidden: vec![100, 50],
            range,
            gamma,
            lr_policy: 0.001,
            lr_value: 0.0001,
            entropy_coeff: 0.01,
            reward_scale: 0.003,
            grad_clip: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct A2cLosses {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct A2cAgent {
    pub policy: Network,
    pub value: Network,
    pub alphas: Vec<f64>,
    pub cfg: A2cConfig,
}

impl A2cAgent {
    pub fn new(cfg: A2cConfig, seed: u64) -> Result<Self, AgentError> {
        let mut policy_sizes = vec![cfg.state_dim];
        policy_sizes.extend(&cfg.hidden);
        policy_sizes.push(N_DISCRETE_ACTIONS);
        let mut value_sizes = vec![cfg.state_dim];
        value_sizes.extend(&cfg.hidden);
        value_sizes.push(1);
        Ok(A2cAgent {
            policy: Network::mlp(&policy_sizes, Activation::Relu, Activation::Softmax, seed)?,
            value: Network::mlp(&value_sizes, Activation::Relu, Activation::Linear, seed ^ 0xa2c)?,
            alphas: discrete_alphas(cfg.range),
            cfg,
        })
    }

    pub fn action_probs(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(self.policy.infer(state)?)
    }

    /// Samples an action index from the current policy.
    pub fn act_sample(&self, state: &[f64], rng: &mut ChaCha8Rng) -> Result<usize, AgentError> {
        let probs = self.action_probs(state)?;
        let u: f64 = rng.gen_range(0.0..1.0);
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(i);
            }
        }
        Ok(probs.len() - 1)
    }

    /// Highest-probability action (greedy evaluation).
    pub fn act_greedy(&self, state: &[f64]) -> Result<usize, AgentError> {
        let probs = self.action_probs(state)?;
        Ok(probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0))
    }

    /// One batch update. Advantages bootstrap from the value head
    /// (`A = r + gamma V(s') - V(s)`, no bootstrap on terminal samples);
    /// the policy ascends `log pi(a|s) * A` plus an entropy bonus, the value
    /// head regresses the same target.
    pub fn update(&mut self, batch: &[A2cSample]) -> Result<A2cLosses, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let n = batch.len() as f64;
        let scale = self.cfg.reward_scale;
        let beta = self.cfg.entropy_coeff;

        let mut value_grads = GradientSet::zeros_like(&self.value);
        let mut policy_grads = GradientSet::zeros_like(&self.policy);
        let mut value_loss = 0.0;
        let mut policy_loss = 0.0;
        let mut entropy_sum = 0.0;
        for s in batch {
            let r = s.reward * scale;
            let target = if s.done {
                r
            } else {
                r + self.cfg.gamma * self.value.infer(&s.next_state)?[0]
            };
            let (v, v_cache) = self.value.forward(&s.state)?;
            let advantage = target - v[0];
            let err = v[0] - target;
            value_loss += err * err / n;
            value_grads.add(&self.value.backward(&v_cache, &[2.0 * err / n])?);

            let (probs, p_cache) = self.policy.forward(&s.state)?;
            let p_a = probs[s.action_idx].max(1e-12);
            let entropy: f64 = -probs.iter().map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 }).sum::<f64>();
            entropy_sum += entropy / n;
            policy_loss += (-(p_a.ln()) * advantage - beta * entropy) / n;
            // d/dp_j of (-ln p_a * A - beta * H), with H = -sum p ln p.
            let mut dprobs = vec![0.0; probs.len()];
            for (j, p) in probs.iter().enumerate() {
                let d_entropy = p.max(1e-12).ln() + 1.0;
                dprobs[j] = beta * d_entropy / n;
                if j == s.action_idx {
                    dprobs[j] += -advantage / p_a / n;
                }
            }
            policy_grads.add(&self.policy.backward(&p_cache, &dprobs)?);
        }
        if !(value_loss.is_finite() && policy_loss.is_finite()) {
            return Err(AgentError::Divergence("a2c loss is not finite".into()));
        }
        clip_grad_norm(&mut value_grads, self.cfg.grad_clip);
        clip_grad_norm(&mut policy_grads, self.cfg.grad_clip);
        self.value.adam_step(&value_grads, self.cfg.lr_value, 0.0)?;
        self.policy.adam_step(&policy_grads, self.cfg.lr_policy, 0.0)?;
        Ok(A2cLosses { policy_loss, value_loss, entropy: entropy_sum })
    }
}

fn clip_grad_norm(grads: &mut GradientSet, max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let sq: f64 = grads
        .d_weights
        .iter()
        .chain(grads.d_biases.iter())
        .map(|v| v.iter().map(|x| x * x).sum::<f64>())
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
}
