//! The learning stack: replay memory, exploration noise, the
//! deterministic-policy and advantage actor-critic learners, gradient-free
//! policy search, fixed-ratio baselines and the hybrid training loops.

pub mod a2c;
pub mod cem;
pub mod ddpg;
pub mod ou;
pub mod policy;
pub mod replay;
pub mod train;

use thiserror::Error;

pub use a2c::{discrete_alphas, A2cAgent, A2cConfig, A2cSample, N_DISCRETE_ACTIONS};
pub use cem::CemOptimizer;
pub use ddpg::{DdpgAgent, DdpgConfig};
pub use ou::OuProcess;
pub use policy::{rollout_per_product, rollout_policy, ActorPolicy, DiscretePolicy, FixedPolicy, Policy};
pub use replay::{ReplayMemory, Sample};
pub use train::{
    calibrate_norm, eval_seed, evaluate_policy, train_cem, train_fixed, train_htlb_a2c, train_htlb_ddpg,
    CemTrainCfg, CurvePoint, LearningCurve, TrainOpts, TrainOutput,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("network error: {0}")]
    Nn(#[from] crate::nn::NnError),
    #[error("environment error: {0}")]
    Env(#[from] crate::market::EnvError),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("update called with an empty batch")]
    EmptyBatch,
}
