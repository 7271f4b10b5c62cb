//! Cross-entropy method: gradient-free search over flattened policy
//! parameters with a diagonal-Gaussian sampling distribution refit to the
//! elite fraction each iteration.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const STD_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct CemOptimizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CemIterationStats {
    pub best_return: f64,
    pub elite_mean_return: f64,
    pub population_mean_return: f64,
}

impl CemOptimizer {
    pub fn new(init_mean: Vec<f64>, init_std: f64) -> Self {
        let n = init_mean.len();
        CemOptimizer { mean: init_mean, std: vec![init_std.max(STD_FLOOR); n] }
    }

    /// Draws `population` parameter vectors, scores each with `evaluate`,
    /// and refits mean and stddev to the top `ceil(elite_frac * population)`
    /// scorers. The stddev never collapses below the floor.
    pub fn iterate(
        &mut self,
        mut evaluate: impl FnMut(&[f64]) -> f64,
        population: usize,
        elite_frac: f64,
        rng: &mut ChaCha8Rng,
    ) -> CemIterationStats {
        assert!(population >= 2, "population must be at least 2");
        assert!(elite_frac > 0.0 && elite_frac <= 1.0, "elite_frac in (0, 1]");
        let dim = self.mean.len();
        let mut scored: Vec<(f64, Vec<f64>)> = (0..population)
            .map(|_| {
                let theta: Vec<f64> = (0..dim)
                    .map(|i| {
                        let n: f64 = StandardNormal.sample(rng);
                        self.mean[i] + self.std[i] * n
                    })
                    .collect();
                (evaluate(&theta), theta)
            })
            .collect();
        let population_mean_return =
            scored.iter().map(|(r, _)| r).sum::<f64>() / population as f64;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let n_elite = ((elite_frac * population as f64).ceil() as usize).clamp(1, population);
        let elite = &scored[..n_elite];
        let elite_mean_return = elite.iter().map(|(r, _)| r).sum::<f64>() / n_elite as f64;

        for i in 0..dim {
            let m = elite.iter().map(|(_, t)| t[i]).sum::<f64>() / n_elite as f64;
            let var = elite.iter().map(|(_, t)| (t[i] - m) * (t[i] - m)).sum::<f64>()
                / n_elite as f64;
            self.mean[i] = m;
            // Blend the elite variance with the previous one: a raw refit
            // collapses the search prematurely because elites cluster much
            // tighter than the sampling distribution.
            let old = self.std[i];
            self.std[i] = (0.5 * old * old + 0.5 * var).sqrt().max(STD_FLOOR);
        }
        CemIterationStats {
            best_return: scored[0].0,
            elite_mean_return,
            population_mean_return,
        }
    }
}
