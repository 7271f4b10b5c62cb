//! The advertising emulator: a frozen copy of the auction configuration that
//! replays the ranking rule for arbitrary candidate actions. It simulates
//! only the advertisement-related half of the state; the recommendation half
//! of every expanded transition is the real logged one. The emulator never
//! touches the live environment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::market::auction::{self, Candidate};
use crate::market::env::{adjust_bid, Action, Transition};
use crate::market::state::{ctr_of, AdPlatformState, MarketState, ProductAdState};
use crate::market::{Env, ProductId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmulatorMode {
    /// Closed-form impressions and clicks; deterministic. The default for
    /// transition expansion (lower-variance hybrid targets).
    ExpectedValue,
    /// Per-request sampling with caller-provided randomness.
    Sampled,
}

#[derive(Debug, Clone, Copy)]
struct FrozenProduct {
    id: ProductId,
    pctr: f64,
    bid: f64,
    target: bool,
}

/// Immutable after construction; share freely across expansion workers.
#[derive(Debug, Clone)]
pub struct Emulator {
    products: Vec<FrozenProduct>,
    /// Indices into `products` in target order.
    target_order: Vec<usize>,
    slots: usize,
    requests: u32,
    match_rate: f64,
    range: f64,
    mode: EmulatorMode,
}

/// An expanded transition: exploratory action, simulated advertisement state,
/// real recommendation state and reward copied from the source transition.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridTransition {
    pub state: MarketState,
    pub action: Action,
    pub reward: f64,
    pub increments: Vec<f64>,
    pub next: MarketState,
    pub hybrid: bool,
}

impl Emulator {
    pub fn from_env(env: &Env) -> Self {
        let products: Vec<FrozenProduct> = env
            .products()
            .iter()
            .map(|p| FrozenProduct { id: p.id, pctr: p.apctr_ad, bid: p.bid, target: p.target })
            .collect();
        let target_order: Vec<usize> =
            products.iter().enumerate().filter(|(_, p)| p.target).map(|(i, _)| i).collect();
        let cfg = env.config();
        Emulator {
            products,
            target_order,
            slots: cfg.slots,
            requests: cfg.requests,
            match_rate: cfg.match_rate,
            range: cfg.range,
            mode: EmulatorMode::ExpectedValue,
        }
    }

    pub fn mode(&self) -> EmulatorMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: EmulatorMode) -> Self {
        self.mode = mode;
        self
    }

    /// Fidelity-degradation knob: multiplicative gaussian perturbation of the
    /// frozen pctr values, for robustness studies. Off by default.
    pub fn with_pctr_jitter(mut self, sigma: f64, seed: u64) -> Self {
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for p in &mut self.products {
                let n: f64 = StandardNormal.sample(&mut rng);
                p.pctr = (p.pctr * (1.0 + sigma * n)).clamp(1e-6, 1.0);
            }
        }
        self
    }

    fn candidates(&self, action: &Action) -> Vec<Candidate> {
        self.products
            .iter()
            .map(|p| {
                let adjusted = if p.target {
                    let k = self
                        .target_order
                        .iter()
                        .position(|&i| self.products[i].id == p.id)
                        .expect("target order covers all targets");
                    adjust_bid(p.bid, action.alpha[k], self.range)
                } else {
                    p.bid
                };
                Candidate { id: p.id, pctr: p.pctr, adjusted_bid: adjusted }
            })
            .collect()
    }

    /// Simulates the successor advertisement-related state for `action`
    /// taken from `state`. Deltas are computed against the statistics in
    /// `state`, exactly as the environment computes its own successor.
    pub fn simulate_o(&self, state: &MarketState, action: &Action) -> AdPlatformState {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.simulate_o_with(state, action, &mut rng)
    }

    /// Sampled-mode variant with explicit randomness; in expected-value mode
    /// the rng is untouched.
    pub fn simulate_o_with(
        &self,
        state: &MarketState,
        action: &Action,
        rng: &mut ChaCha8Rng,
    ) -> AdPlatformState {
        let candidates = self.candidates(action);
        let outcome = match self.mode {
            EmulatorMode::ExpectedValue => {
                auction::run_expected(&candidates, self.requests, self.slots, self.match_rate)
            }
            EmulatorMode::Sampled => auction::run_sampled(
                &candidates,
                self.requests,
                self.slots,
                self.match_rate,
                rng,
            ),
        };
        let mut products = Vec::with_capacity(self.target_order.len());
        for (slot, &i) in self.target_order.iter().enumerate() {
            let o = outcome.per_product[i];
            let prev = &state.o.products[slot];
            let ctr = ctr_of(o.clicks, o.impressions);
            products.push(ProductAdState {
                pv: o.impressions,
                clicks: o.clicks,
                ctr,
                d_pv: o.impressions - prev.pv,
                d_clicks: o.clicks - prev.clicks,
                d_ctr: ctr - prev.ctr,
            });
        }
        AdPlatformState { products }
    }

    /// Expands one real transition into `M` hybrid transitions whose actions
    /// come from `sampler`. The reward and the recommendation-related part
    /// of the successor state are copied from the real transition; only the
    /// advertisement-related part is simulated.
    pub fn expand_transition(
        &self,
        t: &Transition,
        m: usize,
        mut sampler: impl FnMut() -> Action,
        rng: &mut ChaCha8Rng,
    ) -> Vec<HybridTransition> {
        (0..m)
            .map(|_| {
                let action = sampler();
                let o_sim = self.simulate_o_with(&t.state, &action, rng);
                HybridTransition {
                    state: t.state.clone(),
                    action,
                    reward: t.reward,
                    increments: t.increments.clone(),
                    next: MarketState { o: o_sim, x: t.next.x.clone(), t: t.next.t },
                    hybrid: true,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::config::{AuctionMode, EnvConfig, GeneratorConfig};

    fn expected_cfg() -> EnvConfig {
        let mut cfg = EnvConfig::reference();
        cfg.auction = AuctionMode::Expected;
        cfg.organic_noise_sigma = 0.0;
        cfg.requests = 500;
        cfg.generator = Some(GeneratorConfig {
            targets: 4,
            competitors: 8,
            seed: 11,
            cold_start_fraction: 0.25,
            negative_fraction: 0.25,
        });
        cfg
    }

    fn logged_transition(env: &mut Env, action: Action) -> Transition {
        let state = env.state().clone();
        let out = env.step(&action).unwrap();
        Transition {
            state,
            action,
            reward: out.reward,
            increments: out.info.per_product.iter().map(|p| p.organic_increment).collect(),
            next: out.state,
            done: out.done,
        }
    }

    #[test]
    fn replaying_the_logged_action_reproduces_the_logged_successor() {
        let mut env = Env::new(expected_cfg()).unwrap();
        env.reset(5);
        let em = Emulator::from_env(&env);
        let action = Action::constant(env.n_targets(), 0.4);
        let t = logged_transition(&mut env, action.clone());
        let o_sim = em.simulate_o(&t.state, &action);
        assert_eq!(o_sim, t.next.o);
    }

    #[test]
    fn fidelity_over_an_action_grid() {
        let mut env = Env::new(expected_cfg()).unwrap();
        env.reset(7);
        let em = Emulator::from_env(&env);
        let k = env.n_targets();
        for i in 0..21 {
            let alpha = -1.0 + i as f64 * 0.1;
            let action = Action::constant(k, alpha);
            let mut probe = env.clone();
            let state = probe.state().clone();
            let out = probe.step(&action).unwrap();
            let o_sim = em.simulate_o(&state, &action);
            assert_eq!(o_sim, out.state.o, "alpha {alpha}");
        }
    }

    #[test]
    fn bottom_ranked_bid_wins_nothing() {
        let mut env = Env::new(expected_cfg()).unwrap();
        env.reset(9);
        let em = Emulator::from_env(&env);
        let k = env.n_targets();
        // Everyone else at +range, the probed product at -range: zero bid
        // ranks below every competitor.
        let mut action = Action::constant(k, 1.0);
        action.alpha[0] = -1.0;
        let o = em.simulate_o(env.state(), &action);
        assert_eq!(o.products[0].pv, 0.0);
        assert_eq!(o.products[0].clicks, 0.0);
    }

    #[test]
    fn expansion_counts_and_m_zero() {
        let mut env = Env::new(expected_cfg()).unwrap();
        env.reset(3);
        let em = Emulator::from_env(&env);
        let k = env.n_targets();
        let t = logged_transition(&mut env, Action::zeros(k));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hybrids = em.expand_transition(&t, 10, || Action::constant(k, 0.25), &mut rng);
        assert_eq!(hybrids.len(), 10);
        assert!(hybrids.iter().all(|h| h.hybrid));
        let none = em.expand_transition(&t, 0, || Action::zeros(k), &mut rng);
        assert!(none.is_empty());
    }

    #[test]
    fn expansion_with_the_logged_action_duplicates_the_real_successor() {
        let mut env = Env::new(expected_cfg()).unwrap();
        env.reset(13);
        let em = Emulator::from_env(&env);
        let action = Action::constant(env.n_targets(), -0.3);
        let t = logged_transition(&mut env, action.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hybrids = em.expand_transition(&t, 3, || action.clone(), &mut rng);
        for h in hybrids {
            assert_eq!(h.next, t.next);
            assert_eq!(h.reward, t.reward);
        }
    }

    #[test]
    fn expansion_never_touches_the_recommendation_state() {
        let mut env = Env::new(expected_cfg()).unwrap();
        env.reset(17);
        let em = Emulator::from_env(&env);
        let k = env.n_targets();
        let t = logged_transition(&mut env, Action::zeros(k));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counter: f64 = -1.0;
        let hybrids = em.expand_transition(
            &t,
            20,
            || {
                counter += 0.1;
                Action::constant(k, counter.clamp(-1.0, 1.0))
            },
            &mut rng,
        );
        for h in &hybrids {
            assert_eq!(h.next.x, t.next.x);
            assert_eq!(h.state.x, t.state.x);
        }
        // And the o-part does respond to the action spread.
        assert!(hybrids.iter().any(|h| h.next.o != t.next.o));
    }

    #[test]
    fn pctr_jitter_perturbs_the_frozen_model_only() {
        let mut env = Env::new(expected_cfg()).unwrap();
        env.reset(21);
        let clean = Emulator::from_env(&env);
        let jittered = Emulator::from_env(&env).with_pctr_jitter(0.2, 99);
        let action = Action::zeros(env.n_targets());
        let a = clean.simulate_o(env.state(), &action);
        let b = jittered.simulate_o(env.state(), &action);
        assert_ne!(a, b);
        // Same seed, same perturbation.
        let jittered2 = Emulator::from_env(&env).with_pctr_jitter(0.2, 99);
        assert_eq!(b, jittered2.simulate_o(env.state(), &action));
    }
}
