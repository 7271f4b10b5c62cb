//! The eCPM auction: candidates ranked by pctr x adjusted bid (descending,
//! ties to the lower product id), top `slots` per request win. A matching
//! stage is modeled as per-request eligibility jitter with probability
//! `match_rate`. Outcomes resolve either by sampling or in expectation; the
//! advertising emulator reuses these exact routines.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::config::ProductId;

/// Per-product auction entry: ranking score inputs plus the bid actually
/// charged per impression.
#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub id: ProductId,
    pub pctr: f64,
    pub adjusted_bid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProductOutcome {
    pub id: ProductId,
    pub impressions: f64,
    pub clicks: f64,
    pub cost: f64,
}

/// Auction results for one window. `winners_per_request` is populated only
/// in sampled mode; outcomes are aggregated per product either way and are
/// returned in the candidates' input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuctionOutcome {
    pub per_product: Vec<ProductOutcome>,
    pub winners_per_request: Vec<Vec<ProductId>>,
}

/// Candidate indices ordered by descending eCPM score, ties to the lower id.
/// A zero score means the ad is withdrawn (zero bid) and never competes.
fn rank(candidates: &[Candidate]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].pctr * candidates[i].adjusted_bid > 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        let sa = candidates[a].pctr * candidates[a].adjusted_bid;
        let sb = candidates[b].pctr * candidates[b].adjusted_bid;
        sb.total_cmp(&sa).then(candidates[a].id.cmp(&candidates[b].id))
    });
    order
}

/// Samples each request: every candidate is independently eligible with
/// probability `match_rate`, eligible candidates are ranked, and the top
/// `slots` win one impression each. Clicks are binomial per impression at
/// the product's pctr.
pub fn run_sampled(
    candidates: &[Candidate],
    requests: u32,
    slots: usize,
    match_rate: f64,
    rng: &mut ChaCha8Rng,
) -> AuctionOutcome {
    let mut outcome = AuctionOutcome {
        per_product: candidates
            .iter()
            .map(|c| ProductOutcome { id: c.id, ..Default::default() })
            .collect(),
        winners_per_request: Vec::with_capacity(requests as usize),
    };
    if candidates.is_empty() {
        return outcome;
    }
    let order = rank(candidates);
    let mut imps = vec![0u64; candidates.len()];
    for _ in 0..requests {
        let mut winners = Vec::with_capacity(slots);
        // Walking the ranking and stopping at `slots` winners draws
        // eligibility only for candidates that can still win; lower-ranked
        // candidates' eligibility cannot change the outcome.
        for &idx in &order {
            if winners.len() == slots {
                break;
            }
            if rng.gen_bool(match_rate) {
                winners.push(candidates[idx].id);
                imps[idx] += 1;
            }
        }
        outcome.winners_per_request.push(winners);
    }
    for (i, c) in candidates.iter().enumerate() {
        let n = imps[i];
        let clicks = if n > 0 {
            Binomial::new(n, c.pctr.clamp(0.0, 1.0)).unwrap().sample(rng) as f64
        } else {
            0.0
        };
        let o = &mut outcome.per_product[i];
        o.impressions = n as f64;
        o.clicks = clicks;
        o.cost = n as f64 * c.adjusted_bid;
    }
    outcome
}

/// P(X <= k) for X ~ Binomial(n, p).
fn binomial_cdf(n: usize, p: f64, k: usize) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    let q = 1.0 - p;
    let mut pmf = q.powi(n as i32);
    let mut cdf = pmf;
    for i in 0..k.min(n) {
        pmf *= (n - i) as f64 / (i + 1) as f64 * (p / q);
        cdf += pmf;
    }
    cdf.min(1.0)
}

/// Expected-value resolution. A candidate at rank r wins a request iff it
/// is eligible and fewer than `slots` higher-ranked candidates are, so its
/// expected impressions are
/// `requests * match_rate * P(Binomial(r, match_rate) <= slots - 1)`.
/// Expected clicks are impressions x pctr. Deterministic.
pub fn run_expected(
    candidates: &[Candidate],
    requests: u32,
    slots: usize,
    match_rate: f64,
) -> AuctionOutcome {
    let mut outcome = AuctionOutcome {
        per_product: candidates
            .iter()
            .map(|c| ProductOutcome { id: c.id, ..Default::default() })
            .collect(),
        winners_per_request: Vec::new(),
    };
    let order = rank(candidates);
    for (r, &idx) in order.iter().enumerate() {
        let win_prob = match_rate * binomial_cdf(r, match_rate, slots.saturating_sub(1));
        let c = &candidates[idx];
        let imps = requests as f64 * win_prob;
        let o = &mut outcome.per_product[idx];
        o.impressions = imps;
        o.clicks = imps * c.pctr;
        o.cost = imps * c.adjusted_bid;
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cand(id: ProductId, pctr: f64, bid: f64) -> Candidate {
        Candidate { id, pctr, adjusted_bid: bid }
    }

    #[test]
    fn higher_ecpm_wins_the_single_slot() {
        // pctr 0.2 x bid 1.0 = 0.2 loses to pctr 0.1 x bid 3.0 = 0.3.
        let candidates = [cand(0, 0.2, 1.0), cand(1, 0.1, 3.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = run_sampled(&candidates, 1, 1, 1.0, &mut rng);
        assert_eq!(out.winners_per_request[0], vec![1]);
        assert_eq!(out.per_product[1].impressions, 1.0);
        assert_eq!(out.per_product[0].impressions, 0.0);
    }

    #[test]
    fn enough_slots_means_everyone_wins_every_request() {
        let candidates = [cand(0, 0.2, 1.0), cand(1, 0.1, 3.0), cand(2, 0.05, 0.5)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = run_sampled(&candidates, 10, 5, 1.0, &mut rng);
        for p in &out.per_product {
            assert_eq!(p.impressions, 10.0);
        }
    }

    #[test]
    fn equal_scores_break_toward_lower_id() {
        let candidates = [cand(7, 0.2, 1.0), cand(3, 0.1, 2.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = run_sampled(&candidates, 5, 1, 1.0, &mut rng);
        for winners in &out.winners_per_request {
            assert_eq!(winners, &vec![3]);
        }
    }

    #[test]
    fn winners_never_exceed_slots() {
        let candidates: Vec<Candidate> =
            (0..10).map(|i| cand(i, 0.1 + 0.01 * i as f64, 1.0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = run_sampled(&candidates, 500, 3, 0.6, &mut rng);
        for winners in &out.winners_per_request {
            assert!(winners.len() <= 3);
        }
        let total: f64 = out.per_product.iter().map(|p| p.impressions).sum();
        let won: usize = out.winners_per_request.iter().map(|w| w.len()).sum();
        assert_eq!(total, won as f64);
    }

    #[test]
    fn empty_candidate_set_gives_empty_outcome() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = run_sampled(&[], 100, 3, 0.8, &mut rng);
        assert!(out.per_product.is_empty());
        assert!(out.winners_per_request.iter().all(|w| w.is_empty()));
    }

    #[test]
    fn expected_mode_matches_full_eligibility_exactly() {
        let candidates: Vec<Candidate> =
            (0..6).map(|i| cand(i, 0.3 - 0.03 * i as f64, 1.0)).collect();
        let out = run_expected(&candidates, 1000, 3, 1.0);
        for (i, p) in out.per_product.iter().enumerate() {
            let expect = if i < 3 { 1000.0 } else { 0.0 };
            assert_eq!(p.impressions, expect);
        }
    }

    #[test]
    fn expected_impressions_decrease_with_rank() {
        let candidates: Vec<Candidate> =
            (0..8).map(|i| cand(i, 0.3 - 0.02 * i as f64, 1.0)).collect();
        let out = run_expected(&candidates, 2000, 3, 0.8);
        for (r, w) in out.per_product.windows(2).enumerate() {
            // Ranks within the slot count win every eligible request; below
            // that, impressions fall strictly with rank.
            if r + 1 < 3 {
                assert!((w[0].impressions - w[1].impressions).abs() < 1e-9);
            } else {
                assert!(w[0].impressions > w[1].impressions);
            }
        }
        // Rank 0 wins whenever it is eligible.
        assert!((out.per_product[0].impressions - 2000.0 * 0.8).abs() < 1e-9);
    }

    #[test]
    fn sampled_mean_approaches_expected_value() {
        let candidates: Vec<Candidate> =
            (0..5).map(|i| cand(i, 0.25 - 0.03 * i as f64, 1.0)).collect();
        let expected = run_expected(&candidates, 4000, 2, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sampled = run_sampled(&candidates, 4000, 2, 0.7, &mut rng);
        for (e, s) in expected.per_product.iter().zip(&sampled.per_product) {
            let sd = (4000.0_f64 * 0.25).sqrt() * 4.0 + 1.0;
            assert!(
                (e.impressions - s.impressions).abs() < sd,
                "expected {} sampled {}",
                e.impressions,
                s.impressions
            );
        }
    }

    #[test]
    fn binomial_cdf_edge_cases() {
        assert_eq!(binomial_cdf(0, 0.8, 0), 1.0);
        assert!((binomial_cdf(3, 0.5, 3) - 1.0).abs() < 1e-12);
        assert!((binomial_cdf(2, 0.5, 0) - 0.25).abs() < 1e-12);
        assert!((binomial_cdf(2, 0.5, 1) - 0.75).abs() < 1e-12);
    }
}
