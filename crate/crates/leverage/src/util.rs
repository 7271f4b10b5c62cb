//! Seed derivation and small numeric helpers shared across the crate.

/// splitmix64 finalizer; stable across platforms and compiler versions.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives an independent child seed from a master seed, a stream label and
/// an index. Every stochastic component in a run gets its own stream so that
/// consuming draws in one component never shifts another (the paired-baseline
/// and action-independence guarantees rely on this).
pub fn derive_seed(master: u64, stream: &str, index: u64) -> u64 {
    let mut h = master;
    for &b in stream.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ index)
}

/// Mean of a slice; 0 for empty input.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation; 0 for fewer than two samples.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Simple moving average with the given window (centered on trailing edge).
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    xs.iter()
        .enumerate()
        .map(|(i, _)| {
            let lo = i.saturating_sub(w - 1);
            mean(&xs[lo..=i])
        })
        .collect()
}
