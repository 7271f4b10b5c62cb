//! The two per-product response curves driving the organic side of the
//! market: the traffic-win curve (score -> expected organic impressions) and
//! the exposure-effect curve (impressions -> next window's average score).

use serde::{Deserialize, Serialize};

use crate::expfit::FittedExposureFn;

/// Monotone, thresholded map from average recommended score to expected
/// organic impressions per window:
///
/// `T(z) = saturation * (1 - exp(-steepness * (z - threshold)))` for
/// `z > threshold`, else 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficWinFn {
    /// Score below which the ranking truncates the product entirely.
    pub threshold: f64,
    /// Upper bound on expected organic impressions per window.
    pub saturation: f64,
    pub steepness: f64,
}

impl TrafficWinFn {
    pub fn eval(&self, z: f64) -> f64 {
        if z <= self.threshold {
            0.0
        } else {
            self.saturation * (1.0 - (-self.steepness * (z - self.threshold)).exp())
        }
    }
}

/// Shift applied to an exposure-effect curve while a product is advertised:
/// business impressions offset the exposure axis (`lambda`, curve moves
/// left) and the feedback quality of business traffic adds to the score
/// (`mu * quality`, curve moves up; negative quality moves it down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdShift {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for AdShift {
    fn default() -> Self {
        AdShift { lambda: 1.0, mu: 0.05 }
    }
}

/// Unimodal map from a window's impressions to the next window's average
/// recommended score. The parametric form is
///
/// `U(p) = floor + (peak_score - floor) * ((p/peak_exposure) * exp(1 - p/peak_exposure))^decay`
///
/// which rises to `peak_score` at `peak_exposure` and decays afterwards
/// (consumer feedback diluted by excess exposure). `Fitted` wraps a
/// non-parametric estimate from logged data; `Shifted` composes a base curve
/// with an advertising shift so fixed-point analysis can study the
/// advertised regime with the same arithmetic the simulator applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExposureEffectFn {
    Parametric {
        peak_exposure: f64,
        peak_score: f64,
        floor_score: f64,
        decay: f64,
    },
    Fitted(FittedExposureFn),
    Shifted {
        base: Box<ExposureEffectFn>,
        exposure_offset: f64,
        score_offset: f64,
    },
}

impl ExposureEffectFn {
    pub fn parametric(peak_exposure: f64, peak_score: f64, floor_score: f64) -> Self {
        ExposureEffectFn::Parametric { peak_exposure, peak_score, floor_score, decay: 1.0 }
    }

    pub fn eval(&self, p: f64) -> f64 {
        match self {
            ExposureEffectFn::Parametric { peak_exposure, peak_score, floor_score, decay } => {
                let u = (p.max(0.0)) / peak_exposure;
                let bump = (u * (1.0 - u).exp()).powf(*decay);
                (floor_score + (peak_score - floor_score) * bump).clamp(0.0, 1.0)
            }
            ExposureEffectFn::Fitted(fit) => fit.eval(p.max(0.0)),
            ExposureEffectFn::Shifted { base, exposure_offset, score_offset } => {
                (base.eval(p.max(0.0) + exposure_offset) + score_offset).clamp(0.0, 1.0)
            }
        }
    }

    /// The curve as seen while advertising delivers `business_pv` impressions
    /// of feedback quality `quality` per window.
    pub fn shifted(&self, business_pv: f64, quality: f64, shift: AdShift) -> ExposureEffectFn {
        ExposureEffectFn::Shifted {
            base: Box::new(self.clone()),
            exposure_offset: shift.lambda * business_pv,
            score_offset: shift.mu * quality,
        }
    }
}

/// Next-window score under the full update rule used by the simulator:
/// the organic and (offset) business impressions share one exposure axis,
/// and the quality term applies only while business traffic is present.
pub fn exposure_update(
    curve: &ExposureEffectFn,
    shift: AdShift,
    organic_pv: f64,
    business_pv: f64,
    business_quality: f64,
) -> f64 {
    let lift = if business_pv > 0.0 { shift.mu * business_quality } else { 0.0 };
    (curve.eval(organic_pv + shift.lambda * business_pv) + lift).clamp(0.0, 1.0)
}
