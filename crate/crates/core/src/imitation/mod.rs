//! Adversarial imitation from demonstrations with actions (GAIL) or from
//! observations only (GAIfO), with a TRPO generator and a GAE critic.

mod config;
pub mod discriminator;
pub mod gae;
pub mod rollout;
pub mod train;
pub mod trpo;
pub mod value;

#[cfg(test)]
mod tests;

pub use config::{ImitationConfig, Mode};
pub use discriminator::{build_inputs, reward_from_logit, reward_from_probability, DiscLossParts, Discriminator};
pub use gae::{gae, gae_advantages, normalize_advantages};
pub use rollout::{collect_rollouts, evaluate, evaluate_with, mean_std, ActorCritic, RolloutBatch, Sampler};
pub use train::{expert_inputs, new_actor_critic, stream_rng, stream_seed, train, Stream, CurvePoint, LearningCurve, TrainOutcome};
pub use trpo::{conjugate_gradient, trpo_step, TrpoSettings, TrpoStats};
pub use value::{value_loss, value_update};

use crate::dynamics::DynamicsError;
use crate::neural::NeuralError;

#[derive(Debug, thiserror::Error)]
pub enum ImitationError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("GAIL needs expert actions but the dataset is observation-only")]
    DatasetModeMismatch,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("learning curve: {0}")]
    CurveParse(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
