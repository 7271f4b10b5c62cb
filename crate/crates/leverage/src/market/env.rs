//! The two-platform environment. Each step simulates one time window:
//! the advertising auction runs with the adjusted bids, the recommendation
//! platform allocates organic impressions from the scores already in force,
//! and the window's combined exposure feeds back into the next scores.
//!
//! A bid adjustment therefore changes the advertising statistics of the next
//! observed state immediately, but can reach the recommendation statistics
//! only two observations later: this window's organic allocation was priced
//! before the action existed.
//!
//! Rewards are leveraged-traffic increments against a paired manual rollout
//! (all adjust ratios zero) that advances in lockstep on the same per-window
//! random streams.

use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::auction::{self, Candidate, ProductOutcome};
use super::config::{AuctionMode, EnvConfig, Product, ProductId};
use super::curves::exposure_update;
use super::state::{
    assemble_features, ctr_of, raw_count_features, AdPlatformState, MarketState, ProductAdState,
    ProductMeta, ProductRecState, RecPlatformState, RunningNorm,
};
use super::EnvError;
use crate::util::derive_seed;

/// Bid adjust ratios for every target product, clamped to the configured
/// range when applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub alpha: Vec<f64>,
}

impl Action {
    pub fn zeros(k: usize) -> Self {
        Action { alpha: vec![0.0; k] }
    }

    pub fn constant(k: usize, value: f64) -> Self {
        Action { alpha: vec![value; k] }
    }
}

/// `bid * (1 + alpha)` with `alpha` clamped to the adjust range, floored at
/// zero.
pub fn adjust_bid(bid: f64, alpha: f64, range: f64) -> f64 {
    (bid * (1.0 + alpha.clamp(-range, range))).max(0.0)
}

/// One product's realized statistics in one window.
#[derive(Debug, Clone, PartialEq, Default)]
struct WindowRecord {
    ad: ProductOutcome,
    rec_pv: f64,
    rec_clicks: f64,
    /// Score in force when this window was allocated.
    score_used: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductStepInfo {
    pub id: ProductId,
    pub alpha: f64,
    pub pv_ad: f64,
    pub click_ad: f64,
    pub cost_ad: f64,
    pub pv_rec: f64,
    pub click_rec: f64,
    /// Score in force for this window.
    pub score: f64,
    /// Organic impressions vs the paired manual rollout, this window.
    pub organic_increment: f64,
    /// Business impressions vs the paired manual rollout, this window.
    pub business_increment: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepInfo {
    pub per_product: Vec<ProductStepInfo>,
}

impl StepInfo {
    pub fn organic_increment(&self) -> f64 {
        self.per_product.iter().map(|p| p.organic_increment).sum()
    }

    pub fn business_increment(&self) -> f64 {
        self.per_product.iter().map(|p| p.business_increment).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: MarketState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// A joint real transition as stored by training loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: MarketState,
    pub action: Action,
    pub reward: f64,
    /// Per-target organic increments behind the scalar reward.
    pub increments: Vec<f64>,
    pub next: MarketState,
    pub done: bool,
}

/// Episode aggregates of a fixed-policy rollout.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeTotals {
    pub reward: f64,
    pub organic_increment: f64,
    pub business_increment: f64,
    pub organic_pv: f64,
    pub business_pv: f64,
}

#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    products: Vec<Product>,
    target_idx: Vec<usize>,
    episode_seed: u64,
    /// Completed windows this episode (the warm-up is window 0).
    window: u32,
    t: u32,
    done: bool,
    /// Scores in force for the NEXT window's organic allocation.
    scores: Vec<f64>,
    current: Vec<WindowRecord>,
    previous: Option<Vec<WindowRecord>>,
    state: MarketState,
    norm: RunningNorm,
    norm_frozen: bool,
    baseline: Option<Box<Env>>,
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let products = cfg.resolve_products()?;
        let target_idx: Vec<usize> =
            products.iter().enumerate().filter(|(_, p)| p.target).map(|(i, _)| i).collect();
        let k = target_idx.len();
        let empty_state = MarketState {
            o: AdPlatformState { products: vec![Default::default(); k] },
            x: RecPlatformState { products: vec![Default::default(); k] },
            t: 0,
        };
        Ok(Env {
            cfg,
            products,
            target_idx,
            episode_seed: 0,
            window: 0,
            t: 0,
            done: true,
            scores: Vec::new(),
            current: Vec::new(),
            previous: None,
            state: empty_state,
            norm: RunningNorm::default(),
            norm_frozen: false,
            baseline: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn n_targets(&self) -> usize {
        self.target_idx.len()
    }

    pub fn target_ids(&self) -> Vec<ProductId> {
        self.target_idx.iter().map(|&i| self.products[i].id).collect()
    }

    pub fn target_metas(&self) -> Vec<ProductMeta> {
        self.target_idx
            .iter()
            .map(|&i| {
                let p = &self.products[i];
                ProductMeta {
                    id: p.id,
                    apctr_ad: p.apctr_ad,
                    apcvr_ad: p.apcvr_ad,
                    bid: p.bid,
                    ppb: p.ppb,
                }
            })
            .collect()
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    pub fn time(&self) -> u32 {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn range(&self) -> f64 {
        self.cfg.range
    }

    pub fn norm(&self) -> &RunningNorm {
        &self.norm
    }

    /// Installs normalization statistics and stops updating them; greedy
    /// evaluation environments run with the training statistics frozen.
    pub fn freeze_norm(&mut self, norm: RunningNorm) {
        self.norm = norm;
        self.norm_frozen = true;
    }

    /// Starts a new episode: draws initial scores from each product's
    /// configured range, simulates one warm-up window under manual bids, and
    /// initializes the paired manual rollout on the same stream.
    pub fn reset(&mut self, seed: u64) -> MarketState {
        self.reset_core(seed);
        let mut base = self.clone();
        base.baseline = None;
        base.norm_frozen = true;
        self.baseline = Some(Box::new(base));
        self.state.clone()
    }

    fn reset_core(&mut self, seed: u64) {
        self.episode_seed = seed;
        self.window = 0;
        self.t = 0;
        self.done = self.cfg.horizon == 0;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "score-init", 0));
        self.scores = self
            .products
            .iter()
            .map(|p| {
                let (lo, hi) = p.score_init;
                if hi > lo {
                    rng.gen_range(lo..hi)
                } else {
                    lo
                }
            })
            .collect();
        self.previous = None;
        self.current = self.simulate_window(None);
        self.window = 1;
        self.rebuild_state();
        self.update_norm();
    }

    /// Simulates the next window and returns its per-product records.
    /// `alphas = None` runs manual bids. Consumes nothing from `self` other
    /// than the scores, which it replaces with the post-feedback scores.
    fn simulate_window(&mut self, alphas: Option<&[f64]>) -> Vec<WindowRecord> {
        let w = u64::from(self.window);
        let candidates: Vec<Candidate> = self
            .products
            .iter()
            .map(|p| {
                let adjusted = match alphas {
                    Some(a) if p.target => {
                        let k = self.target_idx.iter().position(|&i| self.products[i].id == p.id);
                        adjust_bid(p.bid, a[k.unwrap()], self.cfg.range)
                    }
                    _ => p.bid,
                };
                Candidate { id: p.id, pctr: p.apctr_ad, adjusted_bid: adjusted }
            })
            .collect();
        let outcome = match self.cfg.auction {
            AuctionMode::Sampled => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(self.episode_seed, "ad-window", w));
                auction::run_sampled(
                    &candidates,
                    self.cfg.requests,
                    self.cfg.slots,
                    self.cfg.match_rate,
                    &mut rng,
                )
            }
            AuctionMode::Expected => auction::run_expected(
                &candidates,
                self.cfg.requests,
                self.cfg.slots,
                self.cfg.match_rate,
            ),
        };

        let mut rec_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.episode_seed, "rec-window", w));
        let sigma = self.cfg.organic_noise_sigma;
        let mut records = Vec::with_capacity(self.products.len());
        for (i, p) in self.products.iter().enumerate() {
            let z = self.scores[i];
            let mut pv = p.traffic_win.eval(z);
            if sigma > 0.0 {
                let n: f64 = StandardNormal.sample(&mut rec_rng);
                pv *= (sigma * n - 0.5 * sigma * sigma).exp();
            }
            let clicks = pv * z;
            let biz = outcome.per_product[i];
            let z_next = exposure_update(
                &p.exposure_effect,
                p.shift,
                pv,
                biz.impressions,
                p.business_quality,
            );
            self.scores[i] = z_next;
            records.push(WindowRecord { ad: biz, rec_pv: pv, rec_clicks: clicks, score_used: z });
        }
        records
    }

    fn rebuild_state(&mut self) {
        let k = self.target_idx.len();
        let mut o = AdPlatformState { products: Vec::with_capacity(k) };
        let mut x = RecPlatformState { products: Vec::with_capacity(k) };
        for (slot, &i) in self.target_idx.iter().enumerate() {
            let cur = &self.current[i];
            let ctr_ad = ctr_of(cur.ad.clicks, cur.ad.impressions);
            let ctr_rec = ctr_of(cur.rec_clicks, cur.rec_pv);
            let (d_pv_a, d_ck_a, d_ctr_a, d_pv_r, d_ck_r, d_ctr_r) = match &self.previous {
                None => (0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
                Some(prev) => {
                    let pr = &prev[i];
                    (
                        cur.ad.impressions - pr.ad.impressions,
                        cur.ad.clicks - pr.ad.clicks,
                        ctr_ad - ctr_of(pr.ad.clicks, pr.ad.impressions),
                        cur.rec_pv - pr.rec_pv,
                        cur.rec_clicks - pr.rec_clicks,
                        ctr_rec - ctr_of(pr.rec_clicks, pr.rec_pv),
                    )
                }
            };
            o.products.push(ProductAdState {
                pv: cur.ad.impressions,
                clicks: cur.ad.clicks,
                ctr: ctr_ad,
                d_pv: d_pv_a,
                d_clicks: d_ck_a,
                d_ctr: d_ctr_a,
            });
            x.products.push(ProductRecState {
                pv: cur.rec_pv,
                clicks: cur.rec_clicks,
                ctr: ctr_rec,
                score: cur.score_used,
                d_pv: d_pv_r,
                d_clicks: d_ck_r,
                d_ctr: d_ctr_r,
            });
            debug_assert_eq!(slot, o.products.len() - 1);
        }
        self.state = MarketState { o, x, t: self.t };
    }

    fn update_norm(&mut self) {
        if self.norm_frozen {
            return;
        }
        for slot in 0..self.target_idx.len() {
            let raw = raw_count_features(&self.state.o.products[slot], &self.state.x.products[slot]);
            self.norm.update(&raw);
        }
    }

    /// Advances one time window under the given bid adjust ratios, advances
    /// the paired manual rollout on the same stream, and returns the next
    /// state, the leveraged-traffic reward, and per-product details.
    pub fn step(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action.alpha.len() != self.target_idx.len() {
            return Err(EnvError::ActionDimension {
                expected: self.target_idx.len(),
                got: action.alpha.len(),
            });
        }
        let prev = std::mem::take(&mut self.current);
        let cur = self.simulate_window(Some(&action.alpha));
        self.window += 1;
        self.t += 1;
        self.done = self.t >= self.cfg.horizon;
        self.previous = Some(prev);
        self.current = cur;
        self.rebuild_state();
        self.update_norm();

        let base_records: Vec<WindowRecord> = match self.baseline.as_deref_mut() {
            Some(base) => {
                let recs = base.simulate_window(None);
                base.window += 1;
                base.previous = Some(std::mem::take(&mut base.current));
                base.current = recs.clone();
                recs
            }
            None => self.current.clone(),
        };

        let mut increments = Vec::with_capacity(self.target_idx.len());
        let mut per_product = Vec::with_capacity(self.target_idx.len());
        for (slot, &i) in self.target_idx.iter().enumerate() {
            let cur = &self.current[i];
            let base = &base_records[i];
            let organic_increment = cur.rec_pv - base.rec_pv;
            increments.push(organic_increment);
            per_product.push(ProductStepInfo {
                id: self.products[i].id,
                alpha: action.alpha[slot].clamp(-self.cfg.range, self.cfg.range),
                pv_ad: cur.ad.impressions,
                click_ad: cur.ad.clicks,
                cost_ad: cur.ad.cost,
                pv_rec: cur.rec_pv,
                click_rec: cur.rec_clicks,
                score: cur.score_used,
                organic_increment,
                business_increment: cur.ad.impressions - base.ad.impressions,
            });
        }
        let reward = self.cfg.eta.reward(&increments);
        Ok(StepOutcome {
            state: self.state.clone(),
            reward,
            done: self.done,
            info: StepInfo { per_product },
        })
    }

    /// The 16-dim feature vector for one target product of the current state.
    pub fn assemble_state(&self, product_id: ProductId) -> Result<Vec<f64>, EnvError> {
        let slot = self
            .target_idx
            .iter()
            .position(|&i| self.products[i].id == product_id)
            .ok_or(EnvError::UnknownProduct(product_id))?;
        Ok(self.features_of_state(&self.state, slot))
    }

    /// Feature assembly for an arbitrary stored state (replayed or hybrid),
    /// using this environment's current normalization statistics.
    pub fn features_of_state(&self, state: &MarketState, target_slot: usize) -> Vec<f64> {
        let meta = {
            let p = &self.products[self.target_idx[target_slot]];
            ProductMeta {
                id: p.id,
                apctr_ad: p.apctr_ad,
                apcvr_ad: p.apcvr_ad,
                bid: p.bid,
                ppb: p.ppb,
            }
        };
        assemble_features(
            &meta,
            &state.o.products[target_slot],
            &state.x.products[target_slot],
            &self.norm,
        )
    }

    /// Runs one full episode with a constant adjust ratio on every target.
    pub fn rollout_fixed(&mut self, seed: u64, alpha: f64) -> Result<EpisodeTotals, EnvError> {
        self.reset(seed);
        let action = Action::constant(self.n_targets(), alpha);
        let mut totals = EpisodeTotals::default();
        while !self.is_done() {
            let out = self.step(&action)?;
            totals.reward += out.reward;
            totals.organic_increment += out.info.organic_increment();
            totals.business_increment += out.info.business_increment();
            totals.organic_pv += out.info.per_product.iter().map(|p| p.pv_rec).sum::<f64>();
            totals.business_pv += out.info.per_product.iter().map(|p| p.pv_ad).sum::<f64>();
        }
        Ok(totals)
    }
}

/// One row of the episode log CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLogRow {
    pub t: u32,
    pub product: ProductId,
    pub pv_ad: f64,
    pub click_ad: f64,
    pub pv_rec: f64,
    pub z: f64,
    pub alpha: f64,
    pub reward: f64,
}

impl EpisodeLogRow {
    pub fn from_step(t: u32, info: &StepInfo) -> Vec<EpisodeLogRow> {
        info.per_product
            .iter()
            .map(|p| EpisodeLogRow {
                t,
                product: p.id,
                pv_ad: p.pv_ad,
                click_ad: p.click_ad,
                pv_rec: p.pv_rec,
                z: p.score,
                alpha: p.alpha,
                reward: p.organic_increment,
            })
            .collect()
    }
}

pub fn write_episode_log(path: &Path, rows: &[EpisodeLogRow]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "t,product,pv_ad,click_ad,pv_rec,z,alpha,reward")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            r.t, r.product, r.pv_ad, r.click_ad, r.pv_rec, r.z, r.alpha, r.reward
        )?;
    }
    Ok(())
}
