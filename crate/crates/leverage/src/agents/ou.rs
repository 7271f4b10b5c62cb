//! Ornstein-Uhlenbeck exploration noise: temporally correlated, mean
//! reverting toward `mu`. One process drives the joint action vector; its
//! dimension equals the number of target products.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct OuProcess {
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
    state: Vec<f64>,
}

impl OuProcess {
    pub fn new(dim: usize, theta: f64, sigma: f64, mu: f64) -> Self {
        OuProcess { theta, sigma, mu, state: vec![mu; dim] }
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Resets the state to the mean (fresh process each episode).
    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = self.mu);
    }

    pub fn sample(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        for x in self.state.iter_mut() {
            let n: f64 = StandardNormal.sample(rng);
            *x += self.theta * (self.mu - *x) + self.sigma * n;
        }
        self.state.clone()
    }
}
