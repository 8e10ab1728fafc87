//! REINFORCE training of the walk policy with reward shaping and action dropout.

mod config;
mod paths;
mod reward;
mod rollout;
mod run;

pub use config::{table_action_dropout, TrainConfig};
pub use paths::{PathSignature, UniquePaths};
pub use reward::{binary_reward, perturb_distribution, perturb_with_mask, shaped_reward};
pub use rollout::{reinforce_loss, reinforce_update, rollout_batch, Rollouts, Trajectory, WalkChoice, WalkId};
pub use run::{train, TrainLog, TrainLogRow, TRAIN_LOG_HEADER};
