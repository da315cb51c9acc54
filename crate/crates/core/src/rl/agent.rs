use ndarray::Array1;

use super::rollout::{STREAM_PPO, STREAM_RESET};
use super::{
    gae_advantages, rollout, td_lambda_targets, transform_reward, truncation_values, GaussianPolicy, PpoBatch, PpoConfig,
    PpoLearner, PpoStats, ReturnTracker, RewardWeights, RolloutBuffer, ValueFunction, VecEnv,
};
use crate::energy::Standardization;
use crate::error::{Error, Result};
use crate::maze::MazeWorld;
use crate::rng::RngKey;

#[derive(Debug, Clone, PartialEq)]
pub struct RlConfig {
    pub num_envs: usize,
    pub horizon: usize,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub ppo: PpoConfig,
    pub weights: RewardWeights,
    /// Total environment-step budget.
    pub env_steps: usize,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            num_envs: 64,
            horizon: 16,
            policy_hidden: vec![256, 128],
            value_hidden: vec![256, 128],
            ppo: PpoConfig::default(),
            weights: RewardWeights::default(),
            env_steps: 300_000,
        }
    }
}

impl RlConfig {
    pub fn iterations(&self) -> usize {
        self.env_steps / (self.num_envs * self.horizon).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_envs == 0 || self.horizon == 0 {
            return Err(Error::InvalidArgument("envs and horizon must be positive".into()));
        }
        self.ppo.validate()?;
        self.weights.validate()
    }
}

/// Per-iteration training summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iter: usize,
    pub env_steps: usize,
    /// Mean per-step composed reward before the transform.
    pub mean_raw_return: f64,
    pub mean_transformed_return: f64,
    pub ppo: PpoStats,
}

/// Policy, critic, optimizer state, return tracker and environments.
#[derive(Debug, Clone)]
pub struct Agent {
    pub learner: PpoLearner,
    pub tracker: ReturnTracker,
    pub env: VecEnv,
    pub config: RlConfig,
    key: RngKey,
    iteration: usize,
    env_steps: usize,
}

/// Maps the arena onto `[-1, 1]^2`.
pub fn arena_obs(world: &MazeWorld) -> Result<Standardization<f64>> {
    let a = world.arena;
    let c = a.center();
    Standardization::new(
        Array1::from(vec![c[0], c[1]]),
        Array1::from(vec![(a.x[1] - a.x[0]) / 2.0, (a.y[1] - a.y[0]) / 2.0]),
    )
}

impl Agent {
    pub fn new(world: MazeWorld, config: RlConfig, key: RngKey) -> Result<Self> {
        config.validate()?;
        let mut init = key.stream(&[STREAM_RESET, u64::MAX]);
        let obs = arena_obs(&world)?;
        let policy = GaussianPolicy::new(2, 2, &config.policy_hidden, &mut init)?.with_obs(obs.clone())?;
        let value = ValueFunction::new(2, &config.value_hidden, &mut init)?.with_obs(obs)?;
        let env = VecEnv::new(world, config.num_envs, &key)?;
        Ok(Agent {
            learner: PpoLearner::new(policy, value, config.ppo)?,
            tracker: ReturnTracker::default(),
            env,
            config,
            key,
            iteration: 0,
            env_steps: 0,
        })
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.learner.policy
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn collect(&mut self) -> Result<RolloutBuffer> {
        rollout(
            &self.learner.policy,
            &self.learner.value,
            &mut self.env,
            self.config.horizon,
            &self.key,
            self.iteration as u64,
        )
    }

    /// Composes `learned` with the task rewards, applies the return
    /// transform, and runs one PPO update.
    pub fn learn(&mut self, buffer: &RolloutBuffer, learned: &[f64]) -> Result<IterationStats> {
        if learned.len() != buffer.len() {
            return Err(Error::dim("learned rewards", buffer.len(), learned.len()));
        }
        if let Some(i) = learned.iter().position(|r| !r.is_finite()) {
            return Err(Error::NonFinite(format!("learned reward at row {i}")));
        }
        let w = self.config.weights;
        let raw: Vec<f64> = buffer.task_rewards.iter().zip(learned).map(|(&t, &l)| w.compose(t, l)).collect();
        let transformed: Vec<f64> = raw.iter().map(|&r| transform_reward(r, &self.tracker)).collect();
        let mean_raw = raw.iter().sum::<f64>() / raw.len() as f64;
        let mean_transformed = transformed.iter().sum::<f64>() / raw.len() as f64;
        self.tracker.push(mean_raw);

        let batch = self.batch(buffer, &transformed)?;
        let mut rng = self.key.stream(&[STREAM_PPO, self.iteration as u64]);
        let ppo = self.learner.update(&batch, &mut rng)?;
        self.iteration += 1;
        self.env_steps += buffer.len();
        Ok(IterationStats {
            iter: self.iteration,
            env_steps: self.env_steps,
            mean_raw_return: mean_raw,
            mean_transformed_return: mean_transformed,
            ppo,
        })
    }

    /// Per-env GAE and lambda-return targets. Truncated episodes fold the
    /// discounted value of their final state into the last reward.
    fn batch(&self, buffer: &RolloutBuffer, rewards: &[f64]) -> Result<PpoBatch> {
        let cfg = &self.config.ppo;
        let boot = truncation_values(buffer, &self.learner.value)?;
        let (h, n) = (buffer.horizon, buffer.num_envs);
        let mut advantages = Array1::zeros(h * n);
        let mut targets = Array1::zeros(h * n);
        for e in 0..n {
            let r: Vec<f64> = (0..h).map(|t| rewards[t * n + e] + cfg.gamma * boot[t * n + e]).collect();
            let v: Vec<f64> = buffer.column(&buffer.values, e).collect();
            let d: Vec<bool> = buffer.column(&buffer.dones, e).collect();
            let a = gae_advantages(&r, &v, &d, cfg.gamma, cfg.gae_lambda)?;
            let tg = td_lambda_targets(&r, &v, &d, cfg.gamma, cfg.td_lambda)?;
            for t in 0..h {
                advantages[t * n + e] = a[t];
                targets[t * n + e] = tg[t];
            }
        }
        Ok(PpoBatch {
            states: buffer.states.clone(),
            actions: buffer.actions.clone(),
            log_probs: Array1::from(buffer.log_probs.clone()),
            advantages,
            targets,
        })
    }
}
