//! Deterministic-policy actor-critic over per-product states. The actor
//! maps a product's 16-dim state to a tanh-squashed adjust ratio; the critic
//! scores (state, normalized action) pairs. Targets follow by soft updates.

use rand_chacha::ChaCha8Rng;

use super::ou::OuProcess;
use super::replay::Sample;
use super::AgentError;
use crate::nn::{Activation, GradientSet, Network};

#[derive(Debug, Clone)]
pub struct DdpgConfig {
    pub state_dim: usize,
    pub hidden: Vec<usize>,
    pub range: f64,
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub l2_critic: f64,
    /// Rewards are multiplied by this inside updates only; raw traffic
    /// increments are large for the handful of Adam steps a desk-scale run
    /// affords.
    pub reward_scale: f64,
}

impl DdpgConfig {
    pub fn new(state_dim: usize, range: f64, gamma: f64) -> Self {
        DdpgConfig {
            state_dim,
            hidden: vec![100, 50],
            range,
            gamma,
            tau: 0.01,
            lr_actor: 0.001,
            lr_critic: 0.0001,
            l2_critic: 0.01,
            reward_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Network,
    pub critic: Network,
    pub target_actor: Network,
    pub target_critic: Network,
    pub cfg: DdpgConfig,
}

impl DdpgAgent {
    pub fn new(cfg: DdpgConfig, seed: u64) -> Result<Self, AgentError> {
        let mut actor_sizes = vec![cfg.state_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(1);
        let mut critic_sizes = vec![cfg.state_dim + 1];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);
        let mut actor = Network::mlp(&actor_sizes, Activation::Relu, Activation::Tanh, seed)?;
        // A neutral initial policy: the first bids are the manual ones and
        // exploration starts from the informative middle of the range.
        actor.zero_layer(actor_sizes.len() - 2);
        let critic =
            Network::mlp(&critic_sizes, Activation::Relu, Activation::Linear, seed ^ 0x5eed)?;
        Ok(DdpgAgent {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            cfg,
        })
    }

    /// Policy action for one product: `range * tanh(actor(state))`, plus OU
    /// noise when exploring, clamped to the adjust range. `slot` picks the
    /// product's component of the joint noise vector.
    pub fn act(
        &self,
        state: &[f64],
        explore: bool,
        ou: Option<(&mut OuProcess, &mut ChaCha8Rng, usize)>,
    ) -> Result<f64, AgentError> {
        let raw = self.actor.infer(state)?[0];
        let mut alpha = self.cfg.range * raw;
        if explore {
            if let Some((ou, rng, slot)) = ou {
                alpha += self.cfg.range * ou.sample(rng)[slot];
            }
        }
        Ok(alpha.clamp(-self.cfg.range, self.cfg.range))
    }

    /// Greedy joint action over per-product feature vectors.
    pub fn act_greedy_joint(&self, features: &[Vec<f64>]) -> Result<Vec<f64>, AgentError> {
        features.iter().map(|f| self.act(f, false, None)).collect()
    }

    fn critic_input(&self, state: &[f64], alpha: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(state.len() + 1);
        v.extend_from_slice(state);
        v.push(alpha / self.cfg.range);
        v
    }

    /// One minibatch update: temporal-difference regression of the critic
    /// toward the target networks' bootstrap, deterministic policy gradient
    /// on the actor, then soft target updates.
    ///
    /// Returns (critic loss, mean Q under the current policy), both in
    /// reward-scaled units.
    pub fn update(&mut self, batch: &[Sample]) -> Result<(f64, f64), AgentError> {
        self.update_staged(batch, true)
    }

    /// Update variant that can hold the actor still while the critic is
    /// still calibrating; everything else is identical to [`Self::update`].
    pub fn update_staged(
        &mut self,
        batch: &[Sample],
        update_actor: bool,
    ) -> Result<(f64, f64), AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let n = batch.len() as f64;
        let scale = self.cfg.reward_scale;

        // Critic: y_i = r_i + gamma * Q'(s', pi'(s')), terminal y_i = r_i.
        let mut critic_grads = GradientSet::zeros_like(&self.critic);
        let mut critic_loss = 0.0;
        for s in batch {
            let y = {
                let r = s.reward * scale;
                if s.done {
                    r
                } else {
                    let a_next = self.target_actor.infer(&s.next_state)?[0];
                    let mut input = s.next_state.clone();
                    input.push(a_next);
                    r + self.cfg.gamma * self.target_critic.infer(&input)?[0]
                }
            };
            let input = self.critic_input(&s.state, s.alpha);
            let (q, cache) = self.critic.forward(&input)?;
            let err = q[0] - y;
            critic_loss += err * err / n;
            let g = self.critic.backward(&cache, &[2.0 * err / n])?;
            critic_grads.add(&g);
        }
        if !critic_loss.is_finite() {
            return Err(AgentError::Divergence("critic loss is not finite".into()));
        }
        self.critic.adam_step(&critic_grads, self.cfg.lr_critic, self.cfg.l2_critic)?;

        // Actor: ascend mean Q(s, pi(s)); dQ/da flows through the critic's
        // input gradient into the actor's tanh output.
        let mut actor_grads = GradientSet::zeros_like(&self.actor);
        let mut mean_q = 0.0;
        for s in batch {
            let (a_out, actor_cache) = self.actor.forward(&s.state)?;
            let mut input = s.state.clone();
            input.push(a_out[0]);
            let (q, critic_cache) = self.critic.forward(&input)?;
            mean_q += q[0] / n;
            let dq = self.critic.backward(&critic_cache, &[1.0])?;
            let dq_da = dq.d_input[s.state.len()];
            let g = self.actor.backward(&actor_cache, &[-dq_da / n])?;
            actor_grads.add(&g);
        }
        if update_actor {
            self.actor.adam_step(&actor_grads, self.cfg.lr_actor, 0.0)?;
        }

        self.target_actor.soft_update_from(&self.actor, self.cfg.tau)?;
        self.target_critic.soft_update_from(&self.critic, self.cfg.tau)?;
        Ok((critic_loss, mean_q))
    }
}
