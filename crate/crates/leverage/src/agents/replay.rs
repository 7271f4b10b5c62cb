//! Experience replay: a FIFO ring buffer of joint transitions. Each entry
//! bundles every target product's view of one time step (feature vectors,
//! adjust ratios, per-product rewards); stored entries therefore count
//! steps, real or expanded, not products.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// One per-product training sample, materialized from a joint entry when a
/// minibatch is drawn. `reward` is the raw (unscaled) per-product organic
/// increment.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub alpha: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub hybrid: bool,
}

/// A stored transition: all target products of one step, real or hybrid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    /// Per-product feature vectors of the state.
    pub states: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
    pub done: bool,
    pub hybrid: bool,
}

impl JointSample {
    pub fn product_view(&self, g: usize) -> Sample {
        Sample {
            state: self.states[g].clone(),
            alpha: self.alphas[g],
            reward: self.rewards[g],
            next_state: self.next_states[g].clone(),
            done: self.done,
            hybrid: self.hybrid,
        }
    }

    pub fn n_products(&self) -> usize {
        self.states.len()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayMemory {
    buf: VecDeque<JointSample>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        ReplayMemory { buf: VecDeque::with_capacity(capacity.min(1 << 16)), capacity }
    }

    pub fn push(&mut self, sample: JointSample) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(sample);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Uniform minibatch with replacement: draws a stored step, then one of
    /// its product views.
    pub fn sample_batch(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
        (0..n)
            .map(|_| {
                let joint = &self.buf[rng.gen_range(0..self.buf.len())];
                joint.product_view(rng.gen_range(0..joint.n_products()))
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &JointSample> {
        self.buf.iter()
    }
}
