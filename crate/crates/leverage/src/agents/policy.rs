//! Per-product bidding policies and greedy episode rollouts.

use super::a2c::A2cAgent;
use super::ddpg::DdpgAgent;
use super::AgentError;
use crate::market::{Action, Env, EpisodeTotals};
use crate::nn::Network;

/// Maps one target product's feature vector to its bid adjust ratio.
pub trait Policy {
    fn act(&mut self, features: &[f64], slot: usize) -> Result<f64, AgentError>;
}

/// Emits the same ratio for every product in every window. Zero is the
/// manual baseline; +range and -range are the max/min bid-ratio policies.
#[derive(Debug, Clone, Copy)]
pub struct FixedPolicy(pub f64);

impl Policy for FixedPolicy {
    fn act(&mut self, _features: &[f64], _slot: usize) -> Result<f64, AgentError> {
        Ok(self.0)
    }
}

/// Greedy deterministic policy of a trained actor network.
pub struct ActorPolicy {
    pub actor: Network,
    pub range: f64,
}

impl Policy for ActorPolicy {
    fn act(&mut self, features: &[f64], _slot: usize) -> Result<f64, AgentError> {
        let raw = self.actor.infer(features)?[0];
        Ok((self.range * raw).clamp(-self.range, self.range))
    }
}

impl From<&DdpgAgent> for ActorPolicy {
    fn from(agent: &DdpgAgent) -> Self {
        ActorPolicy { actor: agent.actor.clone(), range: agent.cfg.range }
    }
}

/// Greedy argmax policy of a trained discrete policy head.
pub struct DiscretePolicy {
    pub policy: Network,
    pub alphas: Vec<f64>,
}

impl Policy for DiscretePolicy {
    fn act(&mut self, features: &[f64], _slot: usize) -> Result<f64, AgentError> {
        let probs = self.policy.infer(features)?;
        let idx = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Ok(self.alphas[idx])
    }
}

impl From<&A2cAgent> for DiscretePolicy {
    fn from(agent: &A2cAgent) -> Self {
        DiscretePolicy { policy: agent.policy.clone(), alphas: agent.alphas.clone() }
    }
}

/// Runs one episode under the policy and returns the episode aggregates.
pub fn rollout_policy(
    env: &mut Env,
    seed: u64,
    policy: &mut dyn Policy,
) -> Result<EpisodeTotals, AgentError> {
    env.reset(seed);
    let k = env.n_targets();
    let mut totals = EpisodeTotals::default();
    while !env.is_done() {
        let state = env.state().clone();
        let mut alpha = Vec::with_capacity(k);
        for slot in 0..k {
            let features = env.features_of_state(&state, slot);
            alpha.push(policy.act(&features, slot)?);
        }
        let out = env.step(&Action { alpha })?;
        totals.reward += out.reward;
        totals.organic_increment += out.info.organic_increment();
        totals.business_increment += out.info.business_increment();
        totals.organic_pv += out.info.per_product.iter().map(|p| p.pv_rec).sum::<f64>();
        totals.business_pv += out.info.per_product.iter().map(|p| p.pv_ad).sum::<f64>();
    }
    Ok(totals)
}

/// Per-product episode organic totals under a policy, for the per-product
/// increment report: (policy organic, paired manual organic) per target.
pub fn rollout_per_product(
    env: &mut Env,
    seed: u64,
    policy: &mut dyn Policy,
) -> Result<Vec<(f64, f64)>, AgentError> {
    env.reset(seed);
    let k = env.n_targets();
    let mut organic = vec![(0.0, 0.0); k];
    while !env.is_done() {
        let state = env.state().clone();
        let mut alpha = Vec::with_capacity(k);
        for slot in 0..k {
            let features = env.features_of_state(&state, slot);
            alpha.push(policy.act(&features, slot)?);
        }
        let out = env.step(&Action { alpha })?;
        for (slot, p) in out.info.per_product.iter().enumerate() {
            organic[slot].0 += p.pv_rec;
            organic[slot].1 += p.pv_rec - p.organic_increment;
        }
    }
    Ok(organic)
}
