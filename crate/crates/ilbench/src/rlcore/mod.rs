//! On-policy RL core: rollout storage, generalised advantage estimation,
//! clipped-surrogate PPO updates, and rollout collection against a pluggable
//! reward interface. Nothing here knows which reward it is optimising.

mod buffer;
mod ppo;
mod rollout;

pub use buffer::{gae, normalize_advantages, RolloutBuffer};
pub use ppo::{ppo_batch_grads, ppo_update, Critic, PpoConfig, PpoStats};
pub use rollout::{collect_rollout, EnvStream, RewardMode, RolloutReward, RolloutView};
