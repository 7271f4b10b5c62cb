//! Decomposed agent state: the advertisement-related part (auction window
//! statistics per target product) and the recommendation-related part
//! (organic window statistics and the score in force), plus assembly of the
//! fixed 16-dimensional per-product feature vector.

use serde::{Deserialize, Serialize};

use super::config::ProductId;

/// Feature-vector length produced by [`assemble_features`].
pub const STATE_DIM: usize = 16;

/// Window statistics a product accrued on the advertising platform, with
/// differences against the previous window. `ctr = clicks / max(pv, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProductAdState {
    pub pv: f64,
    pub clicks: f64,
    pub ctr: f64,
    pub d_pv: f64,
    pub d_clicks: f64,
    pub d_ctr: f64,
}

/// Window statistics on the recommendation platform. `score` is the average
/// recommended score that was in force for this window's allocation; the
/// score produced by this window's consumer feedback only becomes visible in
/// the state observed two steps after the action that caused it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProductRecState {
    pub pv: f64,
    pub clicks: f64,
    pub ctr: f64,
    pub score: f64,
    pub d_pv: f64,
    pub d_clicks: f64,
    pub d_ctr: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdPlatformState {
    /// Aligned with the environment's target-product order.
    pub products: Vec<ProductAdState>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecPlatformState {
    pub products: Vec<ProductRecState>,
}

/// The full decomposed state `[o, x]` at step index `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub o: AdPlatformState,
    pub x: RecPlatformState,
    pub t: u32,
}

/// Static description tuple distinguishing products in the agent state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductMeta {
    pub id: ProductId,
    pub apctr_ad: f64,
    pub apcvr_ad: f64,
    pub bid: f64,
    pub ppb: f64,
}

pub fn ctr_of(clicks: f64, pv: f64) -> f64 {
    clicks / pv.max(1.0)
}

/// Number of count-shaped features that get log1p scaling + running
/// standardization (pv/clicks and their deltas on both platforms).
pub const NORM_SLOTS: usize = 8;

/// Running per-feature mean/variance (Welford) for the count features.
/// Updated during training, frozen for greedy evaluation and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunningNorm {
    pub count: u64,
    pub mean: [f64; NORM_SLOTS],
    pub m2: [f64; NORM_SLOTS],
}

impl RunningNorm {
    pub fn update(&mut self, raw: &[f64; NORM_SLOTS]) {
        self.count += 1;
        let n = self.count as f64;
        for i in 0..NORM_SLOTS {
            let delta = raw[i] - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (raw[i] - self.mean[i]);
        }
    }

    pub fn normalize(&self, slot: usize, v: f64) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let std = (self.m2[slot] / self.count as f64).sqrt().max(0.25);
        // Early-run statistics are unreliable; cap the amplification.
        ((v - self.mean[slot]) / std).clamp(-5.0, 5.0)
    }
}

fn log_delta(current: f64, delta: f64) -> f64 {
    let previous = (current - delta).max(0.0);
    current.max(0.0).ln_1p() - previous.ln_1p()
}

/// The raw count features for one product in one window, in the slot order
/// used by [`RunningNorm`].
pub fn raw_count_features(ad: &ProductAdState, rec: &ProductRecState) -> [f64; NORM_SLOTS] {
    [
        ad.pv.max(0.0).ln_1p(),
        ad.clicks.max(0.0).ln_1p(),
        log_delta(ad.pv, ad.d_pv),
        log_delta(ad.clicks, ad.d_clicks),
        rec.pv.max(0.0).ln_1p(),
        rec.clicks.max(0.0).ln_1p(),
        log_delta(rec.pv, rec.d_pv),
        log_delta(rec.clicks, rec.d_clicks),
    ]
}

/// Assembles the 16-dim per-product feature vector:
/// description tuple (apctr, apcvr, bid, log1p ppb), then the advertising
/// window statistics, then the recommendation window statistics. Counts are
/// log1p-scaled and standardized by the running statistics; rates and their
/// deltas are used raw.
pub fn assemble_features(
    meta: &ProductMeta,
    ad: &ProductAdState,
    rec: &ProductRecState,
    norm: &RunningNorm,
) -> Vec<f64> {
    let raw = raw_count_features(ad, rec);
    vec![
        meta.apctr_ad,
        meta.apcvr_ad,
        meta.bid,
        meta.ppb.ln_1p(),
        norm.normalize(0, raw[0]),
        norm.normalize(1, raw[1]),
        ad.ctr,
        norm.normalize(2, raw[2]),
        norm.normalize(3, raw[3]),
        ad.d_ctr,
        norm.normalize(4, raw[4]),
        norm.normalize(5, raw[5]),
        rec.ctr,
        norm.normalize(6, raw[6]),
        norm.normalize(7, raw[7]),
        rec.d_ctr,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: ProductId) -> ProductMeta {
        ProductMeta { id, apctr_ad: 0.1, apcvr_ad: 0.05, bid: 1.0, ppb: 10.0 }
    }

    #[test]
    fn feature_vector_has_fixed_dimension() {
        let f = assemble_features(
            &meta(0),
            &ProductAdState::default(),
            &ProductRecState::default(),
            &RunningNorm::default(),
        );
        assert_eq!(f.len(), STATE_DIM);
    }

    #[test]
    fn zero_deltas_give_zero_delta_features() {
        let ad = ProductAdState { pv: 100.0, clicks: 10.0, ctr: 0.1, ..Default::default() };
        let rec = ProductRecState { pv: 50.0, clicks: 5.0, ctr: 0.1, score: 0.5, ..Default::default() };
        let raw = raw_count_features(&ad, &rec);
        assert_eq!(raw[2], 0.0);
        assert_eq!(raw[3], 0.0);
        assert_eq!(raw[6], 0.0);
        assert_eq!(raw[7], 0.0);
    }

    #[test]
    fn identical_statistics_different_descriptions_differ() {
        let ad = ProductAdState { pv: 40.0, clicks: 4.0, ctr: 0.1, ..Default::default() };
        let rec = ProductRecState { pv: 30.0, clicks: 3.0, ctr: 0.1, score: 0.5, ..Default::default() };
        let norm = RunningNorm::default();
        let a = assemble_features(&meta(0), &ad, &rec, &norm);
        let mut m2 = meta(1);
        m2.apcvr_ad = 0.08;
        let b = assemble_features(&m2, &ad, &rec, &norm);
        assert_ne!(a, b);
        assert_eq!(a[4..], b[4..]);
    }

    #[test]
    fn ctr_convention_at_zero_impressions() {
        assert_eq!(ctr_of(0.0, 0.0), 0.0);
        assert_eq!(ctr_of(5.0, 50.0), 0.1);
    }

    #[test]
    fn running_norm_standardizes() {
        let mut norm = RunningNorm::default();
        for i in 0..100 {
            let v = (i % 10) as f64;
            norm.update(&[v; NORM_SLOTS]);
        }
        // Mean 4.5, population std of 0..9 is ~2.872.
        let z = norm.normalize(0, 4.5);
        assert!(z.abs() < 1e-9);
        let z1 = norm.normalize(0, 7.372);
        assert!((z1 - 1.0).abs() < 0.01, "z1 = {z1}");
    }
}
