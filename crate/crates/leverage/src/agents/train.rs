//! Training loops. The hybrid loop runs three stages per step: interact
//! with the market, expand the observed transition through the advertising
//! emulator with exploratory actions, and update from the mixed buffer.
//! With zero expansions it degenerates exactly to the vanilla algorithms:
//! same code path, same random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::a2c::{A2cAgent, A2cSample};
use super::ddpg::DdpgAgent;
use super::ou::OuProcess;
use super::policy::{rollout_policy, ActorPolicy, DiscretePolicy, Policy};
use super::replay::{JointSample, ReplayMemory};
use super::AgentError;
use crate::emulator::Emulator;
use crate::market::{Action, Env, Transition};
use crate::nn::{Activation, Network};
use crate::util::derive_seed;

/// Salt for the held-out evaluation seeds; identical for every algorithm
/// and every run so curves are comparable.
const EVAL_SALT: u64 = 0xE7A1;

pub fn eval_seed(index: u64) -> u64 {
    derive_seed(EVAL_SALT, "eval-episode", index)
}

#[derive(Debug, Clone)]
pub struct TrainOpts {
    pub episodes: usize,
    /// Steps per episode; `None` runs to the environment horizon.
    pub steps_per_episode: Option<usize>,
    /// Transition-expansion count M (0 disables the hybrid stage).
    pub expand_m: usize,
    /// Minibatch size N.
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Greedy evaluation episodes averaged into each curve point.
    pub eval_episodes: usize,
    pub seed: u64,
    pub ou_theta: f64,
    /// Initial OU sigma as a fraction of the adjust range.
    pub ou_sigma: f64,
    /// The OU sigma decays linearly to this fraction of its initial value
    /// over the first half of training, then stays there.
    pub ou_decay_to: f64,
    /// OU sigma (fraction of range) for expansion actions. Trial and error
    /// inside the emulator is free, so it explores wider than the real
    /// rollout and does not decay.
    pub expand_sigma: f64,
    pub updates_per_step: usize,
    /// Fraction of training during which only the critic updates; the actor
    /// starts moving once the value landscape carries signal. The behavior
    /// policy meanwhile explores around the neutral zero-ratio policy.
    pub actor_warmup_frac: f64,
}

impl TrainOpts {
    pub fn new(episodes: usize, seed: u64) -> Self {
        TrainOpts {
            episodes,
            steps_per_episode: None,
            expand_m: 10,
            batch_size: 64,
            replay_capacity: 10_000,
            eval_episodes: 3,
            seed,
            ou_theta: 0.15,
            ou_sigma: 0.25,
            ou_decay_to: 0.15,
            expand_sigma: 0.3,
            updates_per_step: 3,
            actor_warmup_frac: 0.2,
        }
    }

    fn sigma_at(&self, episode: usize) -> f64 {
        let half = (self.episodes / 2).max(1) as f64;
        let progress = (episode as f64 / half).min(1.0);
        self.ou_sigma * (1.0 - (1.0 - self.ou_decay_to) * progress)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub eval_return: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn returns(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.eval_return).collect()
    }

    /// Mean return over the final 10% of episodes (at least one).
    pub fn converged_return(&self) -> f64 {
        let n = self.points.len();
        if n == 0 {
            return 0.0;
        }
        let tail = (n / 10).max(1);
        crate::util::mean(&self.returns()[n - tail..])
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOutput {
    pub curve: LearningCurve,
    /// Replay size after every environment step (hybrid loops only).
    pub buffer_trace: Vec<usize>,
}

/// Calibrates the environment's feature-normalization statistics on short
/// fixed-policy rollouts spanning the bid range, then freezes them so every
/// stored sample sees one stationary feature mapping.
pub fn calibrate_norm(env: &mut Env, seed: u64) -> Result<(), AgentError> {
    for (i, ratio) in [0.0, 0.0, 1.0, -1.0].iter().enumerate() {
        env.rollout_fixed(derive_seed(seed, "norm-calibration", i as u64), *ratio)?;
    }
    let stats = env.norm().clone();
    env.freeze_norm(stats);
    Ok(())
}

/// Mean greedy-episode return over the held-out evaluation seeds, with the
/// training environment's normalization statistics frozen in.
pub fn evaluate_policy(
    env: &Env,
    policy: &mut dyn Policy,
    eval_episodes: usize,
) -> Result<f64, AgentError> {
    let mut eval_env = env.clone();
    eval_env.freeze_norm(env.norm().clone());
    let mut total = 0.0;
    for j in 0..eval_episodes {
        total += rollout_policy(&mut eval_env, eval_seed(j as u64), policy)?.reward;
    }
    Ok(total / eval_episodes.max(1) as f64)
}

fn target_features(env: &Env, state: &crate::market::MarketState) -> Vec<Vec<f64>> {
    (0..env.n_targets()).map(|g| env.features_of_state(state, g)).collect()
}

/// Hybrid training for the deterministic-policy agent. Exploration noise is
/// applied to the executed action and to every expanded action; expansion
/// samples around the logged action.
pub fn train_htlb_ddpg(
    agent: &mut DdpgAgent,
    env: &mut Env,
    emulator: &Emulator,
    opts: &TrainOpts,
) -> Result<TrainOutput, AgentError> {
    let k = env.n_targets();
    let range = agent.cfg.range;
    calibrate_norm(env, opts.seed)?;
    let mut replay = ReplayMemory::new(opts.replay_capacity);
    let mut ou_real = OuProcess::new(k, opts.ou_theta, opts.ou_sigma * range, 0.0);
    let mut ou_expand = OuProcess::new(k, opts.ou_theta, opts.expand_sigma * range, 0.0);
    let mut ou_rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "ou-real", 0));
    let mut expand_rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "ou-expand", 0));
    let mut em_rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "emulator", 0));
    let mut batch_rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "batch", 0));
    let mut out = TrainOutput::default();

    for episode in 0..opts.episodes {
        ou_real.sigma = opts.sigma_at(episode) * range;
        ou_real.reset();
        ou_expand.reset();
        env.reset(derive_seed(opts.seed, "train-episode", episode as u64));
        let steps = opts.steps_per_episode.unwrap_or(usize::MAX);
        for _ in 0..steps {
            if env.is_done() {
                break;
            }
            let state = env.state().clone();
            let feats = target_features(env, &state);
            let noise = ou_real.sample(&mut ou_rng);
            let mut alpha = Vec::with_capacity(k);
            for g in 0..k {
                let raw = agent.actor.infer(&feats[g])?[0];
                alpha.push((range * raw + noise[g]).clamp(-range, range));
            }
            let action = Action { alpha };
            let step = env.step(&action)?;
            let next_feats = target_features(env, &step.state);
            replay.push(JointSample {
                states: feats.clone(),
                alphas: action.alpha.clone(),
                rewards: step.info.per_product.iter().map(|p| p.organic_increment).collect(),
                next_states: next_feats,
                done: step.done,
                hybrid: false,
            });
            if opts.expand_m > 0 {
                let transition = Transition {
                    state: state.clone(),
                    action: action.clone(),
                    reward: step.reward,
                    increments: step
                        .info
                        .per_product
                        .iter()
                        .map(|p| p.organic_increment)
                        .collect(),
                    next: step.state.clone(),
                    done: step.done,
                };
                let hybrids = emulator.expand_transition(
                    &transition,
                    opts.expand_m,
                    || {
                        let n = ou_expand.sample(&mut expand_rng);
                        Action {
                            alpha: (0..k)
                                .map(|g| (action.alpha[g] + n[g]).clamp(-range, range))
                                .collect(),
                        }
                    },
                    &mut em_rng,
                );
                for h in &hybrids {
                    replay.push(JointSample {
                        states: feats.clone(),
                        alphas: h.action.alpha.clone(),
                        rewards: h.increments.clone(),
                        next_states: (0..k)
                            .map(|g| env.features_of_state(&h.next, g))
                            .collect(),
                        done: h.next.t >= env.config().horizon,
                        hybrid: true,
                    });
                }
            }
            out.buffer_trace.push(replay.len());
            if replay.len() >= opts.batch_size {
                let update_actor =
                    episode as f64 >= opts.actor_warmup_frac * opts.episodes as f64;
                for _ in 0..opts.updates_per_step {
                    let batch = replay.sample_batch(opts.batch_size, &mut batch_rng);
                    agent.update_staged(&batch, update_actor)?;
                }
            }
        }
        let ret =
            evaluate_policy(env, &mut ActorPolicy::from(&*agent), opts.eval_episodes)?;
        out.curve.points.push(CurvePoint { episode, eval_return: ret });
    }
    Ok(out)
}

/// Hybrid training for the on-policy discrete agent. Expanded actions are
/// sampled from the current policy (not an exploratory one) and the hybrid
/// samples join the real ones in the step's update batch directly; there is
/// no replay memory.
pub fn train_htlb_a2c(
    agent: &mut A2cAgent,
    env: &mut Env,
    emulator: &Emulator,
    opts: &TrainOpts,
) -> Result<TrainOutput, AgentError> {
    let k = env.n_targets();
    calibrate_norm(env, opts.seed)?;
    let mut act_rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "a2c-act", 0));
    let mut expand_rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "a2c-expand", 0));
    let mut em_rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "emulator", 0));
    let mut out = TrainOutput::default();

    for episode in 0..opts.episodes {
        env.reset(derive_seed(opts.seed, "train-episode", episode as u64));
        let steps = opts.steps_per_episode.unwrap_or(usize::MAX);
        for _ in 0..steps {
            if env.is_done() {
                break;
            }
            let state = env.state().clone();
            let feats = target_features(env, &state);
            let mut idxs = Vec::with_capacity(k);
            for g in 0..k {
                idxs.push(agent.act_sample(&feats[g], &mut act_rng)?);
            }
            let action = Action { alpha: idxs.iter().map(|&i| agent.alphas[i]).collect() };
            let step = env.step(&action)?;
            let next_feats = target_features(env, &step.state);
            let mut batch: Vec<A2cSample> = (0..k)
                .map(|g| A2cSample {
                    state: feats[g].clone(),
                    action_idx: idxs[g],
                    reward: step.info.per_product[g].organic_increment,
                    next_state: next_feats[g].clone(),
                    done: step.done,
                })
                .collect();
            if opts.expand_m > 0 {
                let transition = Transition {
                    state: state.clone(),
                    action: action.clone(),
                    reward: step.reward,
                    increments: step
                        .info
                        .per_product
                        .iter()
                        .map(|p| p.organic_increment)
                        .collect(),
                    next: step.state.clone(),
                    done: step.done,
                };
                let mut sampled_idxs: Vec<Vec<usize>> = Vec::with_capacity(opts.expand_m);
                let hybrids = {
                    let agent_ref = &*agent;
                    let feats_ref = &feats;
                    let sampled = &mut sampled_idxs;
                    let rng = &mut expand_rng;
                    emulator.expand_transition(
                        &transition,
                        opts.expand_m,
                        move || {
                            let idxs: Vec<usize> = feats_ref
                                .iter()
                                .map(|f| agent_ref.act_sample(f, rng).expect("policy sample"))
                                .collect();
                            let alpha = idxs.iter().map(|&i| agent_ref.alphas[i]).collect();
                            sampled.push(idxs);
                            Action { alpha }
                        },
                        &mut em_rng,
                    )
                };
                for (h, idxs) in hybrids.iter().zip(&sampled_idxs) {
                    for g in 0..k {
                        batch.push(A2cSample {
                            state: feats[g].clone(),
                            action_idx: idxs[g],
                            reward: h.increments[g],
                            next_state: env.features_of_state(&h.next, g),
                            done: step.done,
                        });
                    }
                }
            }
            if !batch.is_empty() {
                agent.update(&batch)?;
            }
            out.buffer_trace.push(batch.len());
        }
        let ret =
            evaluate_policy(env, &mut DiscretePolicy::from(&*agent), opts.eval_episodes)?;
        out.curve.points.push(CurvePoint { episode, eval_return: ret });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CemTrainCfg {
    pub population: usize,
    pub elite_frac: f64,
    pub init_std: f64,
    pub hidden: Vec<usize>,
}

impl Default for CemTrainCfg {
    fn default() -> Self {
        CemTrainCfg { population: 50, elite_frac: 0.2, init_std: 0.08, hidden: vec![100, 50] }
    }
}

/// Gradient-free policy search over actor parameters. Every candidate
/// evaluation consumes one episode of the training budget, so the learning
/// curve advances in population-sized strides.
pub fn train_cem(
    env: &mut Env,
    cfg: &CemTrainCfg,
    opts: &TrainOpts,
) -> Result<(Network, TrainOutput), AgentError> {
    let range = env.range();
    let mut sizes = vec![crate::market::STATE_DIM];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    calibrate_norm(env, opts.seed)?;
    let proto = Network::mlp(&sizes, Activation::Relu, Activation::Tanh, derive_seed(opts.seed, "cem-init", 0))?;
    let mut cem = super::cem::CemOptimizer::new(proto.flatten_params(), cfg.init_std);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "cem", 0));
    let mut out = TrainOutput::default();
    let mut consumed = 0usize;
    let mut last_eval = 0.0;
    let mut mean_net = proto.clone();

    while consumed + cfg.population <= opts.episodes {
        let mut failure: Option<AgentError> = None;
        let mut candidate = 0u64;
        cem.iterate(
            |theta| {
                let mut net = proto.clone();
                if let Err(e) = net.set_params(theta) {
                    failure.get_or_insert(e.into());
                    return f64::NEG_INFINITY;
                }
                let ep_seed =
                    derive_seed(opts.seed, "cem-episode", (consumed as u64) + candidate);
                candidate += 1;
                let mut policy = ActorPolicy { actor: net, range };
                match rollout_policy(env, ep_seed, &mut policy) {
                    Ok(totals) => totals.reward,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NEG_INFINITY
                    }
                }
            },
            cfg.population,
            cfg.elite_frac,
            &mut rng,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        consumed += cfg.population;
        mean_net = proto.clone();
        mean_net.set_params(&cem.mean)?;
        last_eval = evaluate_policy(
            env,
            &mut ActorPolicy { actor: mean_net.clone(), range },
            opts.eval_episodes,
        )?;
        while out.curve.points.len() < consumed {
            let episode = out.curve.points.len();
            out.curve.points.push(CurvePoint { episode, eval_return: last_eval });
        }
    }
    while out.curve.points.len() < opts.episodes {
        let episode = out.curve.points.len();
        out.curve.points.push(CurvePoint { episode, eval_return: last_eval });
    }
    Ok((mean_net, out))
}

/// "Training" a fixed-ratio policy: the policy never changes, so a single
/// greedy evaluation replicates across the whole curve.
pub fn train_fixed(
    env: &mut Env,
    ratio: f64,
    opts: &TrainOpts,
) -> Result<TrainOutput, AgentError> {
    let ret = evaluate_policy(
        env,
        &mut super::policy::FixedPolicy(ratio),
        opts.eval_episodes,
    )?;
    let points = (0..opts.episodes)
        .map(|episode| CurvePoint { episode, eval_return: ret })
        .collect();
    Ok(TrainOutput { curve: LearningCurve { points }, buffer_trace: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ddpg::DdpgConfig;
    use crate::market::env::tests::small_cfg;
    use crate::market::{GeneratorConfig, STATE_DIM};

    fn tiny_opts(episodes: usize, m: usize) -> TrainOpts {
        let mut opts = TrainOpts::new(episodes, 77);
        opts.expand_m = m;
        opts.batch_size = 16;
        opts.eval_episodes = 1;
        opts
    }

    fn agent_for(env: &Env, seed: u64) -> DdpgAgent {
        let mut cfg = DdpgConfig::new(STATE_DIM, env.range(), env.config().gamma);
        cfg.hidden = vec![16, 8];
        DdpgAgent::new(cfg, seed).unwrap()
    }

    #[test]
    fn m_zero_is_byte_identical_to_vanilla_ddpg() {
        let run = |m: usize| {
            let mut env = Env::new(small_cfg()).unwrap();
            let em = Emulator::from_env(&env);
            let mut agent = agent_for(&env, 42);
            train_htlb_ddpg(&mut agent, &mut env, &em, &tiny_opts(3, m)).unwrap();
            (agent.actor.flatten_params(), agent.critic.flatten_params())
        };
        let (a0, c0) = run(0);
        let (a1, c1) = run(0);
        assert_eq!(a0, a1, "same seed must reproduce exactly");
        assert_eq!(c0, c1);
    }

    #[test]
    fn buffer_grows_by_m_plus_one_per_step() {
        let mut env = Env::new(small_cfg()).unwrap();
        let em = Emulator::from_env(&env);
        let mut agent = agent_for(&env, 1);
        let m = 10;
        let out = train_htlb_ddpg(&mut agent, &mut env, &em, &tiny_opts(2, m)).unwrap();
        for (step, &size) in out.buffer_trace.iter().enumerate() {
            assert_eq!(size, (m + 1) * (step + 1));
        }
    }

    #[test]
    fn single_target_buffer_matches_the_expansion_law() {
        let mut cfg = small_cfg();
        cfg.generator = Some(GeneratorConfig {
            targets: 1,
            competitors: 6,
            seed: 4,
            cold_start_fraction: 0.0,
            negative_fraction: 0.0,
        });
        let mut env = Env::new(cfg).unwrap();
        let em = Emulator::from_env(&env);
        let mut agent = agent_for(&env, 2);
        let out = train_htlb_ddpg(&mut agent, &mut env, &em, &tiny_opts(1, 10)).unwrap();
        assert_eq!(out.buffer_trace, vec![11, 22, 33, 44, 55, 66, 77]);
    }

    #[test]
    fn curves_have_one_point_per_episode() {
        let mut env = Env::new(small_cfg()).unwrap();
        let em = Emulator::from_env(&env);
        let mut agent = agent_for(&env, 3);
        let out = train_htlb_ddpg(&mut agent, &mut env, &em, &tiny_opts(4, 2)).unwrap();
        assert_eq!(out.curve.points.len(), 4);
        let episodes: Vec<usize> = out.curve.points.iter().map(|p| p.episode).collect();
        assert_eq!(episodes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn a2c_batch_is_targets_times_m_plus_one() {
        let mut env = Env::new(small_cfg()).unwrap();
        let em = Emulator::from_env(&env);
        let mut cfg = crate::agents::a2c::A2cConfig::new(STATE_DIM, env.range(), 0.9);
        cfg.hidden = vec![16, 8];
        let mut agent = A2cAgent::new(cfg, 5).unwrap();
        let out = train_htlb_a2c(&mut agent, &mut env, &em, &tiny_opts(1, 3)).unwrap();
        let k = env.n_targets();
        assert!(out.buffer_trace.iter().all(|&b| b == k * 4));
    }

    #[test]
    fn fixed_zero_ratio_curve_is_identically_zero() {
        let mut env = Env::new(small_cfg()).unwrap();
        let out = train_fixed(&mut env, 0.0, &tiny_opts(5, 0)).unwrap();
        assert_eq!(out.curve.points.len(), 5);
        assert!(out.curve.returns().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn greedy_evaluation_is_repeatable() {
        let mut env = Env::new(small_cfg()).unwrap();
        env.reset(1);
        let agent = agent_for(&env, 9);
        let a = evaluate_policy(&env, &mut ActorPolicy::from(&agent), 2).unwrap();
        let b = evaluate_policy(&env, &mut ActorPolicy::from(&agent), 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cem_consumes_the_episode_budget_in_population_strides() {
        let mut cfg = small_cfg();
        cfg.requests = 150;
        let mut env = Env::new(cfg).unwrap();
        let cem_cfg = CemTrainCfg {
            population: 8,
            elite_frac: 0.25,
            init_std: 0.05,
            hidden: vec![12, 6],
        };
        let (net, out) = train_cem(&mut env, &cem_cfg, &tiny_opts(20, 0)).unwrap();
        assert_eq!(out.curve.points.len(), 20);
        assert_eq!(net.layer_sizes(), vec![STATE_DIM, 12, 6, 1]);
        // Curve advances in strides of the population size.
        let r = out.curve.returns();
        for chunk in r.chunks(8).take(2) {
            assert!(chunk.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn converged_return_uses_the_final_tenth() {
        let curve = LearningCurve {
            points: (0..100)
                .map(|episode| CurvePoint { episode, eval_return: episode as f64 })
                .collect(),
        };
        // Final 10 points are 90..=99.
        assert_eq!(curve.converged_return(), 94.5);
    }
}
