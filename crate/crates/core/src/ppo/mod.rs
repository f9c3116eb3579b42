//! Recurrent PPO: rollout collection, GAE, clipped updates, training and evaluation.

pub mod config;
pub mod eval;
pub mod gae;
pub mod loss;
pub mod rollout;
pub mod train;
pub mod update;
pub mod value_norm;
pub mod verify;

pub use config::{PpoConfig, ShapingConfig};
pub use eval::{evaluate, EpisodePlan, EpisodeRecord};
pub use gae::{compute_gae, compute_gae_batch};
pub use loss::{ppo_loss, LossCoefs};
pub use rollout::{Collector, PartnerSampler, RolloutBatch};
pub use train::{train, Condition, MetricsRow, TrainOutcome, TrainSpec};
pub use update::{ppo_update, Learner, UpdateStats};
pub use value_norm::ValueNorm;
