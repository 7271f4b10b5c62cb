//! Analysis tooling for the organic-traffic feedback loop: fixed points of
//! the composed map `p -> T(U(p))`, trajectory simulation, advertising-shift
//! studies, phenomenon classification over before/during/after trajectories,
//! and the fixed-bid-ratio sweep.

use serde::{Deserialize, Serialize};

use crate::market::curves::{AdShift, ExposureEffectFn, TrafficWinFn};

/// Bisection tolerance for fixed-point location.
const ROOT_TOL: f64 = 1e-10;
/// Grid resolution of the sign scan.
const SCAN_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub p: f64,
    pub stability: Stability,
    /// |d(T∘U)/dp| at the point.
    pub derivative_magnitude: f64,
}

/// All fixed points of `p -> T(U(p))` on a search interval, with the two
/// landmarks of the traffic dynamics picked out: the cold-start point (the
/// unstable basin boundary below which organic traffic decays to zero) and
/// the attracting stable point giving the steady-state traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub points: Vec<FixedPoint>,
    pub cold_start_point: Option<f64>,
    pub stable_point: Option<f64>,
}

fn compose(t: &TrafficWinFn, u: &ExposureEffectFn, p: f64) -> f64 {
    t.eval(u.eval(p))
}

fn derivative_magnitude(t: &TrafficWinFn, u: &ExposureEffectFn, p: f64) -> f64 {
    let h = 1e-6 * p.abs().max(1.0);
    if p - h < 0.0 {
        // One-sided at the left boundary; the curves are defined for p >= 0.
        ((compose(t, u, p + h) - compose(t, u, p)) / h).abs()
    } else {
        ((compose(t, u, p + h) - compose(t, u, p - h)) / (2.0 * h)).abs()
    }
}

/// One step of the traffic chain: `z = U(p)`, then `p' = T(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPoint {
    pub p: f64,
    /// The score computed from this window's traffic, i.e. `U(p)`.
    pub z_next: f64,
}

/// Iterates the organic-traffic Markov chain
/// `{p_0, z_1 = U(p_0), p_1 = T(z_1), ...}` for `steps` transitions and
/// returns the visited (p, U(p)) pairs, the initial point included.
pub fn simulate_chain(
    t: &TrafficWinFn,
    u: &ExposureEffectFn,
    p0: f64,
    steps: usize,
) -> Vec<ChainPoint> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut p = p0.max(0.0);
    for _ in 0..=steps {
        let z = u.eval(p);
        out.push(ChainPoint { p, z_next: z });
        p = t.eval(z);
    }
    out
}

fn bisect(t: &TrafficWinFn, u: &ExposureEffectFn, mut lo: f64, mut hi: f64) -> f64 {
    let g = |p: f64| compose(t, u, p) - p;
    let mut g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < ROOT_TOL {
            return mid;
        }
        let g_mid = g(mid);
        if (g_lo <= 0.0) == (g_mid <= 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Finds all fixed points of `p -> T(U(p))` on `[0, search_max]` by a
/// 10^4-point sign scan refined with bisection, and classifies each by the
/// local derivative magnitude (< 1 is attracting).
pub fn fixed_points(
    t: &TrafficWinFn,
    u: &ExposureEffectFn,
    search_max: f64,
) -> FixedPointReport {
    let g = |p: f64| compose(t, u, p) - p;
    let mut roots: Vec<f64> = Vec::new();
    let step = search_max / SCAN_POINTS as f64;

    // Endpoint zero (the origin is a fixed point whenever U(0) stays below
    // the win threshold) is not a sign change, so test it explicitly.
    if g(0.0).abs() < ROOT_TOL {
        roots.push(0.0);
    }
    let mut prev_p = 0.0;
    let mut prev_g = g(0.0);
    for i in 1..=SCAN_POINTS {
        let p = step * i as f64;
        let gp = g(p);
        if gp == 0.0 {
            roots.push(p);
        } else if (prev_g < 0.0 && gp > 0.0) || (prev_g > 0.0 && gp < 0.0) {
            roots.push(bisect(t, u, prev_p, p));
        }
        prev_p = p;
        prev_g = gp;
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-6 * search_max.max(1.0));

    let points: Vec<FixedPoint> = roots
        .iter()
        .map(|&p| {
            let d = derivative_magnitude(t, u, p);
            FixedPoint {
                p,
                stability: if d < 1.0 { Stability::Stable } else { Stability::Unstable },
                derivative_magnitude: d,
            }
        })
        .collect();

    let stable_point = points
        .iter()
        .filter(|fp| fp.stability == Stability::Stable && fp.p > 1e-6)
        .map(|fp| fp.p)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a: f64| a.max(p))));
    let cold_start_point = stable_point.and_then(|b| {
        points
            .iter()
            .filter(|fp| fp.stability == Stability::Unstable && fp.p < b)
            .map(|fp| fp.p)
            .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a: f64| a.max(p))))
    });

    FixedPointReport { points, cold_start_point, stable_point }
}

/// The exposure-effect curve as it looks while the product is advertised:
/// `p -> clamp(U(p + lambda * business_pv) + mu * quality, 0, 1)`. The same
/// composition the simulator applies each window, exposed as a curve object
/// so the advertised regime can be analyzed with [`fixed_points`].
pub fn shifted_exposure(
    u: &ExposureEffectFn,
    business_pv: f64,
    quality: f64,
    shift: AdShift,
) -> ExposureEffectFn {
    u.shifted(business_pv, quality, shift)
}

/// Relative-improvement buckets used when counting traffic phenomena.
/// Intervals are closed on the right; the extremes are open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImprovementBucket {
    /// (-inf, -50%]
    BelowMinus50,
    /// (-50%, -10%]
    Minus50ToMinus10,
    /// (-10%, 0]
    Minus10ToZero,
    /// (0, +10%]
    ZeroToPlus10,
    /// (+10%, +50%]
    Plus10ToPlus50,
    /// (+50%, +inf)
    AbovePlus50,
}

impl ImprovementBucket {
    pub fn from_percent(v: f64) -> Self {
        if v <= -50.0 {
            ImprovementBucket::BelowMinus50
        } else if v <= -10.0 {
            ImprovementBucket::Minus50ToMinus10
        } else if v <= 0.0 {
            ImprovementBucket::Minus10ToZero
        } else if v <= 10.0 {
            ImprovementBucket::ZeroToPlus10
        } else if v <= 50.0 {
            ImprovementBucket::Plus10ToPlus50
        } else {
            ImprovementBucket::AbovePlus50
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ImprovementBucket::BelowMinus50 => "<-50%",
            ImprovementBucket::Minus50ToMinus10 => "(-50%,-10%]",
            ImprovementBucket::Minus10ToZero => "(-10%,0]",
            ImprovementBucket::ZeroToPlus10 => "(0,10%]",
            ImprovementBucket::Plus10ToPlus50 => "(10%,50%]",
            ImprovementBucket::AbovePlus50 => ">50%",
        }
    }
}

/// Stage-to-stage comparison of one product's organic traffic across the
/// before-advertising / while-advertising / after-advertising stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenomenonReport {
    pub mean_before: f64,
    pub mean_while: f64,
    pub mean_after: f64,
    pub while_vs_before_pct: f64,
    pub after_vs_while_pct: f64,
    pub after_vs_before_pct: f64,
    pub while_vs_before: ImprovementBucket,
    pub after_vs_while: ImprovementBucket,
    pub after_vs_before: ImprovementBucket,
}

fn relative_pct(new: f64, old: f64) -> f64 {
    100.0 * (new - old) / old.max(1.0)
}

/// Buckets the relative organic-traffic improvements across the three
/// advertising stages. A zero reference mean is compared against
/// `max(mean, 1)` so degenerate trajectories still classify.
pub fn classify_phenomenon(
    traj_before: &[f64],
    traj_while: &[f64],
    traj_after: &[f64],
) -> PhenomenonReport {
    let m = |xs: &[f64]| crate::util::mean(xs);
    let (mb, mw, ma) = (m(traj_before), m(traj_while), m(traj_after));
    let wb = relative_pct(mw, mb);
    let aw = relative_pct(ma, mw);
    let ab = relative_pct(ma, mb);
    PhenomenonReport {
        mean_before: mb,
        mean_while: mw,
        mean_after: ma,
        while_vs_before_pct: wb,
        after_vs_while_pct: aw,
        after_vs_before_pct: ab,
        while_vs_before: ImprovementBucket::from_percent(wb),
        after_vs_while: ImprovementBucket::from_percent(aw),
        after_vs_before: ImprovementBucket::from_percent(ab),
    }
}

/// One row of the fixed-bid-ratio sweep: mean episode business and organic
/// traffic increments against the paired manual rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub business_increment: f64,
    pub organic_increment: f64,
}

/// Runs fixed-ratio episodes against the paired manual baseline for every
/// ratio, averaging the episode increments over the seeds.
pub fn bid_ratio_sweep(
    env_config: &crate::market::EnvConfig,
    ratios: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>, crate::market::EnvError> {
    let mut env = crate::market::Env::new(env_config.clone())?;
    let mut rows = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let mut business = 0.0;
        let mut organic = 0.0;
        for &seed in seeds {
            let totals = env.rollout_fixed(seed, ratio)?;
            business += totals.business_increment;
            organic += totals.organic_increment;
        }
        let n = seeds.len().max(1) as f64;
        rows.push(SweepRow {
            ratio,
            business_increment: business / n,
            organic_increment: organic / n,
        });
    }
    Ok(rows)
}

/// Stable-traffic filter: coefficient of variation below the threshold.
pub fn is_stable_traffic(traj: &[f64], cov_threshold: f64) -> bool {
    let m = crate::util::mean(traj);
    if m <= 0.0 {
        return false;
    }
    crate::util::std_dev(traj) / m < cov_threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn standard_curves() -> (TrafficWinFn, ExposureEffectFn) {
        (
            TrafficWinFn { threshold: 0.3, saturation: 300.0, steepness: 6.0 },
            ExposureEffectFn::parametric(150.0, 0.7, 0.05),
        )
    }

    fn high_quality_curves() -> (TrafficWinFn, ExposureEffectFn) {
        (
            TrafficWinFn { threshold: 0.2, saturation: 400.0, steepness: 5.0 },
            ExposureEffectFn::parametric(200.0, 0.8, 0.3),
        )
    }

    fn low_quality_curves() -> (TrafficWinFn, ExposureEffectFn) {
        (
            TrafficWinFn { threshold: 0.35, saturation: 200.0, steepness: 6.0 },
            ExposureEffectFn::parametric(100.0, 0.25, 0.02),
        )
    }

    #[test]
    fn standard_regime_has_origin_cold_start_and_stable_points() {
        let (t, u) = standard_curves();
        let report = fixed_points(&t, &u, 1000.0);
        assert_eq!(report.points.len(), 3, "{report:?}");
        assert_eq!(report.points[0].p, 0.0);
        assert_eq!(report.points[0].stability, Stability::Stable);
        let a = report.cold_start_point.expect("cold-start point");
        let b = report.stable_point.expect("stable point");
        assert!(a > 0.0 && a < b, "A={a} B={b}");
        assert_eq!(report.points[1].stability, Stability::Unstable);
        assert_eq!(report.points[2].stability, Stability::Stable);
        // Each reported point is verified against the defining equation.
        for fp in &report.points {
            let err = (compose(&t, &u, fp.p) - fp.p).abs();
            assert!(err < 1e-9 * fp.p.max(1.0), "residual {err} at {}", fp.p);
        }
    }

    #[test]
    fn high_quality_regime_has_single_interior_stable_point() {
        let (t, u) = high_quality_curves();
        let report = fixed_points(&t, &u, 2000.0);
        assert_eq!(report.points.len(), 1, "{report:?}");
        assert_eq!(report.points[0].stability, Stability::Stable);
        assert!(report.cold_start_point.is_none());
        assert!(report.stable_point.unwrap() > 100.0);
    }

    #[test]
    fn low_quality_regime_has_only_the_origin() {
        let (t, u) = low_quality_curves();
        let report = fixed_points(&t, &u, 1000.0);
        assert_eq!(report.points.len(), 1, "{report:?}");
        assert_eq!(report.points[0].p, 0.0);
        assert!(report.stable_point.is_none());
        assert!(report.cold_start_point.is_none());
    }

    #[test]
    fn chain_is_constant_at_the_stable_point() {
        let (t, u) = standard_curves();
        let b = fixed_points(&t, &u, 1000.0).stable_point.unwrap();
        let chain = simulate_chain(&t, &u, b, 20);
        for pt in &chain {
            assert!((pt.p - b).abs() < 1e-7, "p drifted to {}", pt.p);
        }
    }

    #[test]
    fn chain_decays_to_zero_below_cold_start() {
        let (t, u) = standard_curves();
        let a = fixed_points(&t, &u, 1000.0).cold_start_point.unwrap();
        let chain = simulate_chain(&t, &u, a * 0.9, 50);
        assert_eq!(chain.last().unwrap().p, 0.0);
    }

    #[test]
    fn chain_converges_to_stable_point_above_cold_start() {
        let (t, u) = standard_curves();
        let report = fixed_points(&t, &u, 1000.0);
        let (a, b) = (report.cold_start_point.unwrap(), report.stable_point.unwrap());
        for p0 in [a + 1.0, 50.0, 150.0, b, 320.0, 420.0] {
            let chain = simulate_chain(&t, &u, p0, 100);
            let p_end = chain.last().unwrap().p;
            assert!((p_end - b).abs() < 1e-6, "p0={p0} ended at {p_end}, B={b}");
        }
    }

    #[test]
    fn positive_shift_creates_interior_point_for_low_quality_products() {
        let (t, u) = low_quality_curves();
        let shift = AdShift { lambda: 1.0, mu: 0.2 };
        let advertised = shifted_exposure(&u, 50.0, 1.0, shift);
        let report = fixed_points(&t, &advertised, 1000.0);
        let b = report.stable_point.expect("advertising should open a stable point");
        assert!(b > 10.0, "B'={b}");
        // Withdrawn advertising closes it again.
        assert!(fixed_points(&t, &u, 1000.0).stable_point.is_none());
    }

    #[test]
    fn negative_quality_shift_lowers_or_removes_the_stable_point() {
        let (t, u) = standard_curves();
        let b = fixed_points(&t, &u, 1000.0).stable_point.unwrap();
        let shift = AdShift { lambda: 1.0, mu: 0.1 };
        let worse = shifted_exposure(&u, 0.0, -1.0, shift);
        let report = fixed_points(&t, &worse, 1000.0);
        match report.stable_point {
            Some(b2) => assert!(b2 < b, "B'={b2} should be below B={b}"),
            None => {}
        }
    }

    #[test]
    fn zero_shift_is_pointwise_identity() {
        let (_, u) = standard_curves();
        let same = shifted_exposure(&u, 0.0, 0.0, AdShift::default());
        for p in [0.0, 3.0, 77.0, 150.0, 900.0] {
            assert_eq!(same.eval(p), u.eval(p));
        }
    }

    #[test]
    fn classify_equal_stages_lands_in_the_zero_bucket() {
        let traj = vec![100.0, 100.0, 100.0];
        let r = classify_phenomenon(&traj, &traj, &traj);
        assert_eq!(r.while_vs_before, ImprovementBucket::Minus10ToZero);
        assert_eq!(r.after_vs_while, ImprovementBucket::Minus10ToZero);
        assert_eq!(r.after_vs_before, ImprovementBucket::Minus10ToZero);
    }

    #[test]
    fn classify_doubling_is_above_fifty_percent() {
        let before = vec![50.0, 50.0];
        let during = vec![100.0, 100.0];
        let r = classify_phenomenon(&before, &during, &before);
        assert_eq!(r.while_vs_before, ImprovementBucket::AbovePlus50);
        assert_eq!(r.while_vs_before_pct, 100.0);
    }

    #[test]
    fn classify_cold_start_escape() {
        // Near-zero organic before, stable-point organic after withdrawal.
        let before = vec![0.0, 0.0, 0.0];
        let during = vec![30.0, 120.0, 220.0];
        let after = vec![245.0, 248.0, 248.0];
        let r = classify_phenomenon(&before, &during, &after);
        assert_eq!(r.after_vs_before, ImprovementBucket::AbovePlus50);
    }

    #[test]
    fn buckets_partition_the_line() {
        for v in [-1e9, -50.0000001, -50.0, -49.9999, -10.0, -0.0001, 0.0, 0.0001, 10.0, 10.1, 50.0, 50.1, 1e9]
        {
            let b = ImprovementBucket::from_percent(v);
            let count = [
                v <= -50.0,
                v > -50.0 && v <= -10.0,
                v > -10.0 && v <= 0.0,
                v > 0.0 && v <= 10.0,
                v > 10.0 && v <= 50.0,
                v > 50.0,
            ]
            .iter()
            .filter(|&&x| x)
            .count();
            assert_eq!(count, 1);
            let expected = [
                ImprovementBucket::BelowMinus50,
                ImprovementBucket::Minus50ToMinus10,
                ImprovementBucket::Minus10ToZero,
                ImprovementBucket::ZeroToPlus10,
                ImprovementBucket::Plus10ToPlus50,
                ImprovementBucket::AbovePlus50,
            ][[
                v <= -50.0,
                v > -50.0 && v <= -10.0,
                v > -10.0 && v <= 0.0,
                v > 0.0 && v <= 10.0,
                v > 10.0 && v <= 50.0,
                v > 50.0,
            ]
            .iter()
            .position(|&x| x)
            .unwrap()];
            assert_eq!(b, expected);
        }
    }

    #[test]
    fn sweep_zero_ratio_is_the_manual_identity() {
        let cfg = crate::market::env::tests::small_cfg();
        let rows = bid_ratio_sweep(&cfg, &[0.0], &[1, 2]).unwrap();
        assert_eq!(rows[0].business_increment, 0.0);
        assert_eq!(rows[0].organic_increment, 0.0);
    }

    #[test]
    fn sweep_business_increment_is_monotone_in_the_ratio() {
        let mut cfg = crate::market::env::tests::small_cfg();
        // Expected-value auction: deterministic, so monotonicity is exact.
        cfg.auction = crate::market::AuctionMode::Expected;
        let ratios = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let rows = bid_ratio_sweep(&cfg, &ratios, &[5]).unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].business_increment >= w[0].business_increment,
                "{:?} -> {:?}",
                w[0],
                w[1]
            );
        }
        assert!(rows.last().unwrap().business_increment > 0.0);
    }

    #[test]
    fn stable_traffic_filter() {
        assert!(is_stable_traffic(&[100.0, 101.0, 99.0], 0.1));
        assert!(!is_stable_traffic(&[100.0, 10.0, 300.0], 0.1));
        assert!(!is_stable_traffic(&[0.0, 0.0], 0.1));
    }
}
