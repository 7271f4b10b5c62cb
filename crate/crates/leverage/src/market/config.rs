//! Environment configuration: explicit product lists, or a seeded generator
//! that builds a desk-scale market with a controlled mix of product regimes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curves::{AdShift, ExposureEffectFn, TrafficWinFn};
use super::EnvError;
use crate::dynamics;

pub type ProductId = u32;

/// How a window's auction resolves: per-request sampling of eligibility and
/// clicks, or closed-form expected values (deterministic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AuctionMode {
    #[default]
    Sampled,
    Expected,
}

/// Reward weighting across target products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EtaScheme {
    /// eta_k = 1: total organic-traffic increment.
    #[default]
    Uniform,
    /// eta_k = 1/|r_k| (zero increments contribute 0): counts products with
    /// increased minus products with decreased organic traffic.
    InverseMagnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: ProductId,
    /// Average predicted click-through rate from the advertising side.
    pub apctr_ad: f64,
    /// Average predicted conversion rate; correlates with feedback quality.
    pub apcvr_ad: f64,
    /// Advertiser-set fixed bid.
    pub bid: f64,
    /// Transaction price.
    pub ppb: f64,
    pub traffic_win: TrafficWinFn,
    pub exposure_effect: ExposureEffectFn,
    /// Whether the agent controls this product's bid.
    pub target: bool,
    #[serde(default)]
    pub shift: AdShift,
    /// Relative quality of consumer feedback on business traffic; negative
    /// for products whose ads interact worse than their organic listings.
    #[serde(default = "default_quality")]
    pub business_quality: f64,
    /// Range [lo, hi] the initial recommended score is drawn from.
    #[serde(default = "default_score_init")]
    pub score_init: (f64, f64),
}

fn default_quality() -> f64 {
    1.0
}

fn default_score_init() -> (f64, f64) {
    (0.4, 0.6)
}

impl Product {
    pub fn validate(&self) -> Result<(), EnvError> {
        let ok = self.apctr_ad > 0.0
            && self.apctr_ad < 1.0
            && self.apcvr_ad > 0.0
            && self.apcvr_ad < 1.0
            && self.bid > 0.0
            && self.ppb > 0.0
            && self.score_init.0 <= self.score_init.1;
        if ok {
            Ok(())
        } else {
            Err(EnvError::InvalidConfig(format!("product {} has out-of-range attributes", self.id)))
        }
    }
}

/// Seeded builder for a synthetic market. Target products are drawn from
/// three regimes:
///
/// * `standard` products hold a healthy stable point below their exposure
///   peak; moderate business traffic lifts their score, heavy business
///   traffic dilutes it.
/// * `cold_start` products start below their cold-start point and win no
///   organic traffic until enough business exposure pushes them over it.
/// * `negative` products get worse consumer feedback on business traffic
///   than on organic traffic, so advertising drags their score down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub targets: usize,
    pub competitors: usize,
    pub seed: u64,
    #[serde(default = "default_cold_fraction")]
    pub cold_start_fraction: f64,
    #[serde(default = "default_negative_fraction")]
    pub negative_fraction: f64,
}

fn default_cold_fraction() -> f64 {
    0.25
}

fn default_negative_fraction() -> f64 {
    0.125
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    #[serde(default = "default_slots")]
    pub slots: usize,
    #[serde(default = "default_requests")]
    pub requests: u32,
    #[serde(default = "default_match_rate")]
    pub match_rate: f64,
    /// Bid adjust ratios live in [-range, +range].
    #[serde(default = "default_range")]
    pub range: f64,
    /// Time steps per episode.
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Lognormal sigma multiplying organic impressions (0 disables).
    #[serde(default)]
    pub organic_noise_sigma: f64,
    #[serde(default)]
    pub auction: AuctionMode,
    #[serde(default)]
    pub eta: EtaScheme,
    #[serde(default)]
    pub products: Vec<Product>,
    #[serde(default)]
    pub generator: Option<GeneratorConfig>,
}

fn default_slots() -> usize {
    3
}
fn default_requests() -> u32 {
    2000
}
fn default_match_rate() -> f64 {
    0.8
}
fn default_range() -> f64 {
    1.0
}
fn default_horizon() -> u32 {
    7
}
fn default_gamma() -> f64 {
    0.9
}

impl EnvConfig {
    /// The desk-scale reference market: 8 targets and 24 competitors,
    /// 2000 requests per window, 7-step episodes.
    pub fn reference() -> Self {
        EnvConfig {
            slots: default_slots(),
            requests: default_requests(),
            // Lower than the config default: a smoother rank-to-traffic
            // gradient lets mid-ranked products compete for impressions.
            match_rate: 0.5,
            range: default_range(),
            horizon: default_horizon(),
            gamma: default_gamma(),
            organic_noise_sigma: 0.15,
            auction: AuctionMode::Sampled,
            eta: EtaScheme::Uniform,
            products: Vec::new(),
            generator: Some(GeneratorConfig {
                targets: 8,
                competitors: 24,
                seed: 20,
                cold_start_fraction: default_cold_fraction(),
                negative_fraction: default_negative_fraction(),
            }),
        }
    }

    /// Explicit products plus generated ones; validates the result.
    pub fn resolve_products(&self) -> Result<Vec<Product>, EnvError> {
        let mut products = self.products.clone();
        if let Some(gen) = &self.generator {
            let base_id = products.iter().map(|p| p.id + 1).max().unwrap_or(0);
            products.extend(generate_products(gen, base_id));
        }
        for p in &products {
            p.validate()?;
        }
        let mut ids: Vec<ProductId> = products.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != products.len() {
            return Err(EnvError::InvalidConfig("duplicate product ids".into()));
        }
        Ok(products)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.slots == 0 {
            return Err(EnvError::InvalidConfig("slots must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.match_rate) {
            return Err(EnvError::InvalidConfig("match_rate must be in [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(EnvError::InvalidConfig("gamma must be in [0,1]".into()));
        }
        if self.range <= 0.0 {
            return Err(EnvError::InvalidConfig("range must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(EnvError::InvalidConfig("horizon must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Regime {
    Standard,
    ColdStart,
    Negative,
}

/// Draws one target product of the requested regime, re-drawing until the
/// curve pair certifiably shows the intended fixed-point structure.
fn draw_target(rng: &mut ChaCha8Rng, id: ProductId, regime: Regime) -> Product {
    for _ in 0..64 {
        let saturation = match regime {
            Regime::ColdStart => rng.gen_range(180.0..260.0),
            _ => rng.gen_range(280.0..420.0),
        };
        let threshold = rng.gen_range(0.26..0.33);
        let steepness = match regime {
            Regime::ColdStart => rng.gen_range(5.0..7.0),
            _ => rng.gen_range(6.0..8.0),
        };
        let floor_score = rng.gen_range(0.03..0.07);
        let (peak_mult, decay) = match regime {
            // Stable point just below the exposure peak: moderate business
            // exposure climbs toward the peak, heavy exposure overshoots it.
            Regime::Standard => (rng.gen_range(0.95..1.15), rng.gen_range(2.5..3.5)),
            // Stable point at the peak: any business exposure overshoots,
            // compounding the bad feedback on the ads themselves.
            Regime::Negative => (rng.gen_range(0.80..0.95), rng.gen_range(2.5..3.5)),
            // Gentler bump with an earlier peak; the interesting obstacle
            // here is the cold-start basin, not dilution.
            Regime::ColdStart => (rng.gen_range(0.55..0.7), rng.gen_range(1.3..1.8)),
        };
        let peak_exposure = peak_mult * saturation;
        // Warm peaks stay modest so the stable score lands where the
        // traffic-win curve still has slope; saturated products would not
        // feel score changes at all.
        let peak_score = match regime {
            Regime::ColdStart => threshold + rng.gen_range(0.36..0.44),
            _ => threshold + rng.gen_range(0.30..0.38),
        };

        let t = TrafficWinFn { threshold, saturation, steepness };
        let u = ExposureEffectFn::Parametric {
            peak_exposure,
            peak_score,
            floor_score,
            decay,
        };
        let report = dynamics::fixed_points(&t, &u, 4.0 * saturation);
        let (a, b) = match (report.cold_start_point, report.stable_point) {
            (Some(a), Some(b)) => (a, b),
            _ => continue,
        };
        if b < 0.55 * saturation || a > 0.7 * b {
            continue;
        }
        match regime {
            // Warm products must start comfortably inside the attracting
            // basin at the low end of their initial-score range.
            Regime::Standard | Regime::Negative => {
                if t.eval(0.50) < 1.15 * a {
                    continue;
                }
            }
            // The cold-start basin boundary must sit between the exposure
            // offset manual bids buy and the offset a full boost buys.
            Regime::ColdStart => {
                if a > 50.0 || a < 25.0 {
                    continue;
                }
            }
        }

        let quality = match regime {
            Regime::Negative => rng.gen_range(-1.0..-0.5),
            _ => rng.gen_range(0.55..0.95),
        };
        let jitter: f64 = rng.gen_range(-0.01..0.01);
        let apcvr_ad = (0.04 + 0.10 * (quality + 1.0) / 2.0 + jitter).clamp(0.01, 0.99);
        let (apctr_ad, bid) = match regime {
            // Cold products carry weak manual eCPM so manual bids alone do
            // not push them over the cold-start point, while a full boost
            // lifts them several ranks.
            Regime::ColdStart => (rng.gen_range(0.10..0.14), rng.gen_range(1.0..1.1)),
            _ => (rng.gen_range(0.12..0.185), rng.gen_range(1.05..1.35)),
        };
        let score_init = match regime {
            Regime::ColdStart => (threshold - 0.06, threshold - 0.01),
            _ => (0.50, 0.62),
        };
        // Business exposure couples strongly into cold products (escaping is
        // the point) and mildly into warm ones (manual bids should leave
        // visible headroom below the exposure peak).
        let lambda = match regime {
            Regime::ColdStart => rng.gen_range(0.22..0.30),
            _ => rng.gen_range(0.12..0.20),
        };
        let shift = AdShift { lambda, mu: rng.gen_range(0.04..0.07) };
        return Product {
            id,
            apctr_ad,
            apcvr_ad,
            bid,
            ppb: rng.gen_range(5.0..40.0),
            traffic_win: t,
            exposure_effect: u,
            target: true,
            shift,
            business_quality: quality,
            score_init,
        };
    }
    unreachable!("target generation failed to certify a curve regime in 64 draws");
}

fn draw_competitor(rng: &mut ChaCha8Rng, id: ProductId, strong: bool) -> Product {
    let (apctr_ad, bid) = if strong {
        (rng.gen_range(0.17..0.26), rng.gen_range(1.7..2.1))
    } else {
        (rng.gen_range(0.04..0.12), rng.gen_range(0.5..1.2))
    };
    let saturation = rng.gen_range(200.0..400.0);
    let threshold = rng.gen_range(0.26..0.34);
    Product {
        id,
        apctr_ad,
        apcvr_ad: rng.gen_range(0.03..0.12),
        bid,
        ppb: rng.gen_range(5.0..40.0),
        traffic_win: TrafficWinFn { threshold, saturation, steepness: rng.gen_range(5.0..7.0) },
        exposure_effect: ExposureEffectFn::Parametric {
            peak_exposure: rng.gen_range(0.8..1.2) * saturation,
            peak_score: threshold + rng.gen_range(0.3..0.4),
            floor_score: rng.gen_range(0.03..0.07),
            decay: 2.0,
        },
        target: false,
        shift: AdShift { lambda: rng.gen_range(0.30..0.45), mu: rng.gen_range(0.04..0.07) },
        business_quality: rng.gen_range(0.4..0.9),
        score_init: (0.40, 0.60),
    }
}

pub fn generate_products(gen: &GeneratorConfig, base_id: ProductId) -> Vec<Product> {
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
    let n_cold = (gen.cold_start_fraction * gen.targets as f64).round() as usize;
    let n_neg = (gen.negative_fraction * gen.targets as f64).round() as usize;
    let mut products = Vec::with_capacity(gen.targets + gen.competitors);
    for i in 0..gen.targets {
        let regime = if i < n_cold {
            Regime::ColdStart
        } else if i < n_cold + n_neg {
            Regime::Negative
        } else {
            Regime::Standard
        };
        products.push(draw_target(&mut rng, base_id + i as ProductId, regime));
    }
    let n_strong = gen.competitors.min(4.max(gen.competitors / 6));
    for j in 0..gen.competitors {
        let id = base_id + (gen.targets + j) as ProductId;
        products.push(draw_competitor(&mut rng, id, j < n_strong));
    }
    products
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_products_resolve_with_expected_mix() {
        let cfg = EnvConfig::reference();
        cfg.validate().unwrap();
        let products = cfg.resolve_products().unwrap();
        assert_eq!(products.len(), 32);
        let targets: Vec<&Product> = products.iter().filter(|p| p.target).collect();
        assert_eq!(targets.len(), 8);
        let cold = targets.iter().filter(|p| p.score_init.1 < p.traffic_win.threshold).count();
        let negative = targets.iter().filter(|p| p.business_quality < 0.0).count();
        assert_eq!(cold, 2);
        assert_eq!(negative, 1);
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let cfg = EnvConfig::reference();
        let a = cfg.resolve_products().unwrap();
        let b = cfg.resolve_products().unwrap();
        assert_eq!(a, b);
        let mut cfg2 = cfg.clone();
        cfg2.generator.as_mut().unwrap().seed = 21;
        assert_ne!(cfg2.resolve_products().unwrap(), a);
    }

    #[test]
    fn generated_targets_have_certified_regimes() {
        let products = EnvConfig::reference().resolve_products().unwrap();
        for p in products.iter().filter(|p| p.target) {
            let report = dynamics::fixed_points(&p.traffic_win, &p.exposure_effect, 1600.0);
            let a = report.cold_start_point.expect("cold-start point");
            let b = report.stable_point.expect("stable point");
            assert!(a < b);
            if p.score_init.1 < p.traffic_win.threshold {
                // Cold regime: the initial score wins no organic traffic.
                assert_eq!(p.traffic_win.eval(p.score_init.1), 0.0);
            } else {
                // Warm regimes start well inside the attracting basin.
                assert!(p.traffic_win.eval(p.score_init.0) > a);
            }
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut cfg = EnvConfig::reference();
        let products = cfg.resolve_products().unwrap();
        cfg.generator = None;
        cfg.products = products;
        cfg.products[1].id = cfg.products[0].id;
        assert!(cfg.resolve_products().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = EnvConfig::reference();
        let text = toml::to_string(&cfg).unwrap();
        let back: EnvConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
