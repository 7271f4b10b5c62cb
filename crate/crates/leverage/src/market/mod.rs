//! The blended-feed market: eCPM advertising auction, recommendation
//! allocation through traffic-win curves, exposure-effect feedback, state
//! assembly and leveraged-traffic rewards.

pub mod auction;
pub mod config;
pub mod curves;
pub mod env;
pub mod reward;
pub mod state;

use thiserror::Error;

pub use config::{AuctionMode, EnvConfig, EtaScheme, GeneratorConfig, Product, ProductId};
pub use curves::{exposure_update, AdShift, ExposureEffectFn, TrafficWinFn};
pub use env::{
    adjust_bid, write_episode_log, Action, Env, EpisodeLogRow, EpisodeTotals, StepInfo,
    StepOutcome, Transition,
};
pub use reward::compute_reward;
pub use state::{
    assemble_features, AdPlatformState, MarketState, ProductAdState, ProductMeta,
    ProductRecState, RecPlatformState, RunningNorm, STATE_DIM,
};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode already finished; reset before stepping")]
    EpisodeFinished,
    #[error("action has {got} components, environment has {expected} targets")]
    ActionDimension { expected: usize, got: usize },
    #[error("product {0} is not a target of this environment")]
    UnknownProduct(ProductId),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}
