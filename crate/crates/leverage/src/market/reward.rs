//! Reward aggregation over per-product leveraged-traffic increments.

use super::config::EtaScheme;
use super::EnvError;

/// Weighted sum of per-product increments: `sum_k eta_k * r_k`.
pub fn compute_reward(increments: &[f64], etas: &[f64]) -> Result<f64, EnvError> {
    if increments.len() != etas.len() {
        return Err(EnvError::LengthMismatch { left: increments.len(), right: etas.len() });
    }
    Ok(increments.iter().zip(etas).map(|(r, eta)| eta * r).sum())
}

impl EtaScheme {
    /// Applies the scheme's weighting. `InverseMagnitude` realizes
    /// `eta_k = 1/|r_k|` (with zero increments contributing 0) as an exact
    /// signed count of products with increased minus decreased traffic.
    pub fn reward(&self, increments: &[f64]) -> f64 {
        match self {
            EtaScheme::Uniform => increments.iter().sum(),
            EtaScheme::InverseMagnitude => increments
                .iter()
                .map(|&r| {
                    if r == 0.0 {
                        0.0
                    } else {
                        r.signum()
                    }
                })
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights_sum_increments() {
        assert_eq!(compute_reward(&[5.0, -2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap(), 6.0);
        assert_eq!(EtaScheme::Uniform.reward(&[5.0, -2.0, 3.0]), 6.0);
    }

    #[test]
    fn inverse_magnitude_counts_signs() {
        // eta_k = 1/|r_k| turns each nonzero increment into +-1.
        assert_eq!(EtaScheme::InverseMagnitude.reward(&[5.0, -2.0, 3.0]), 1.0);
        assert_eq!(EtaScheme::InverseMagnitude.reward(&[0.0, 0.0]), 0.0);
        let etas = [1.0 / 5.0, 1.0 / 2.0, 1.0 / 3.0];
        let plain = compute_reward(&[5.0, -2.0, 3.0], &etas).unwrap();
        assert!((plain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(compute_reward(&[1.0], &[1.0, 1.0]).is_err());
    }
}
