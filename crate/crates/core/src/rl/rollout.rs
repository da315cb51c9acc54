use ndarray::{s, Array2, ArrayView2};

use super::{GaussianPolicy, ValueFunction};
use crate::error::{Error, Result};
use crate::maze::{DoneReason, EpisodeState, MazeWorld};
use crate::rng::{Rng, RngKey};

/// Stream tags under a run key.
pub(crate) const STREAM_RESET: u64 = 0;
pub(crate) const STREAM_ROLLOUT: u64 = 1;
pub(crate) const STREAM_PPO: u64 = 2;

/// A batch of independent maze episodes stepped in lockstep.
#[derive(Debug, Clone)]
pub struct VecEnv {
    pub world: MazeWorld,
    states: Vec<EpisodeState>,
}

impl VecEnv {
    pub fn new(world: MazeWorld, num_envs: usize, key: &RngKey) -> Result<Self> {
        if num_envs == 0 {
            return Err(Error::InvalidArgument("need at least one environment".into()));
        }
        world.validate()?;
        let states = (0..num_envs)
            .map(|e| world.reset(&mut key.stream(&[STREAM_RESET, e as u64])))
            .collect();
        Ok(VecEnv { world, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[EpisodeState] {
        &self.states
    }

    pub fn observations(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.states.len(), 2), |(e, j)| self.states[e].position[j])
    }
}

/// Transitions of one rollout, stored time-major: row `t * num_envs + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub horizon: usize,
    pub num_envs: usize,
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub next_states: Array2<f64>,
    pub task_rewards: Vec<f64>,
    /// Episode ended at this step (goal or episode horizon); the env was reset.
    pub dones: Vec<bool>,
    /// Subset of `dones` caused by the episode horizon rather than the goal.
    pub truncated: Vec<bool>,
    pub log_probs: Vec<f64>,
    /// `(horizon + 1) * num_envs` state values; the last block bootstraps.
    pub values: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.horizon * self.num_envs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(s, s')` feature rows.
    pub fn features(&self) -> Array2<f64> {
        ndarray::concatenate![ndarray::Axis(1), self.states, self.next_states]
    }

    /// Sequence of env `e` from a flat time-major vector.
    pub fn column<'a, T: Copy>(&self, flat: &'a [T], e: usize) -> impl Iterator<Item = T> + 'a {
        let n = self.num_envs;
        flat.iter().skip(e).step_by(n).copied()
    }
}

/// Steps every env `horizon` times with actions sampled from `policy`,
/// resetting envs whose episode ends. Env `e` draws from the stream
/// `(rollout, e, iteration)` so results do not depend on scheduling.
pub fn rollout(
    policy: &GaussianPolicy,
    value: &ValueFunction,
    env: &mut VecEnv,
    horizon: usize,
    key: &RngKey,
    iteration: u64,
) -> Result<RolloutBuffer> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("rollout horizon must be positive".into()));
    }
    let n = env.len();
    let rows = horizon * n;
    let mut rngs: Vec<Rng> = (0..n).map(|e| key.stream(&[STREAM_ROLLOUT, e as u64, iteration])).collect();
    let mut buf = RolloutBuffer {
        horizon,
        num_envs: n,
        states: Array2::zeros((rows, 2)),
        actions: Array2::zeros((rows, 2)),
        next_states: Array2::zeros((rows, 2)),
        task_rewards: vec![0.0; rows],
        dones: vec![false; rows],
        truncated: vec![false; rows],
        log_probs: vec![0.0; rows],
        values: vec![0.0; rows + n],
    };
    for t in 0..horizon {
        let obs = env.observations();
        let (actions, logp) = policy.sample_batch(obs.view(), &mut rngs)?;
        let values = value.values(obs.view())?;
        let block = t * n..(t + 1) * n;
        buf.states.slice_mut(s![block.clone(), ..]).assign(&obs);
        buf.actions.slice_mut(s![block.clone(), ..]).assign(&actions);
        for e in 0..n {
            let i = t * n + e;
            if !logp[e].is_finite() {
                return Err(Error::NonFinite("action log-probability".into()));
            }
            buf.log_probs[i] = logp[e];
            buf.values[i] = values[e];
            let velocity = action_to_velocity(&env.world, [actions[[e, 0]], actions[[e, 1]]]);
            let (next, r) = env.world.step(&env.states[e], velocity)?;
            buf.next_states[[i, 0]] = next.position[0];
            buf.next_states[[i, 1]] = next.position[1];
            buf.task_rewards[i] = r;
            buf.dones[i] = next.is_done();
            buf.truncated[i] = next.done == Some(DoneReason::Horizon);
            env.states[e] = if next.is_done() { env.world.reset(&mut rngs[e]) } else { next };
        }
    }
    let last = value.values(env.observations().view())?;
    buf.values[rows..].copy_from_slice(last.as_slice().expect("contiguous"));
    Ok(buf)
}

/// Policy actions are normalized: one unit is the world's max speed.
pub fn action_to_velocity(world: &MazeWorld, action: [f64; 2]) -> [f64; 2] {
    [action[0] * world.max_speed, action[1] * world.max_speed]
}

/// Value of each truncated step's final state, or zero.
pub fn truncation_values(buf: &RolloutBuffer, value: &ValueFunction) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..buf.len()).filter(|&i| buf.truncated[i]).collect();
    let mut out = vec![0.0; buf.len()];
    if idx.is_empty() {
        return Ok(out);
    }
    let states = buf.next_states.select(ndarray::Axis(0), &idx);
    let v = value.values(states.view())?;
    for (k, &i) in idx.iter().enumerate() {
        out[i] = v[k];
    }
    Ok(out)
}

pub(crate) fn rows(view: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    view.select(ndarray::Axis(0), idx)
}
