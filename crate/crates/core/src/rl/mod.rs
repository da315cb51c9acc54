//! PPO with GAE and lambda-return critics, a fixed-covariance Gaussian
//! policy, batched maze rollouts, and the return-relative reward transform.

mod advantage;
mod agent;
mod policy;
mod ppo;
mod reward;
mod rollout;
#[cfg(test)]
mod tests;

pub use advantage::{gae_advantages, td_lambda_targets};
pub use agent::{arena_obs, Agent, IterationStats, RlConfig};
pub use policy::{GaussianPolicy, ValueFunction, LOG_STD, POLICY_HEAD_GAIN};
pub use ppo::{clipped_surrogate, normalize, surrogate_coefficient, PpoBatch, PpoConfig, PpoLearner, PpoStats};
pub use reward::{compose_reward, transform_reward, ReturnTracker, RewardWeights, TRACKER_CAPACITY};
pub use rollout::{action_to_velocity, rollout, truncation_values, RolloutBuffer, VecEnv};
