use std::io::Write;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::maze::{DoneReason, MazeWorld, Point};
use crate::metrics::{avg_dtw_pose_error, spectral_arc_length, top_k_by_return, SparcParams, Trajectory};
use crate::rl::{action_to_velocity, GaussianPolicy};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub episodes: usize,
    pub top_k: usize,
    pub horizon: usize,
    /// Seconds per environment step, for the spectral metric.
    pub dt: f64,
    pub sparc: SparcParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 50,
            top_k: 20,
            horizon: 300,
            dt: 0.1,
            sparc: SparcParams::default(),
        }
    }
}

/// Action source for evaluation episodes.
pub enum Controller<'a> {
    /// Mean action of a trained policy.
    Policy(&'a GaussianPolicy),
    /// Uniform normalized actions in `[-1, 1]^2`.
    Random,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub positions: Vec<Point>,
    pub task_return: f64,
    pub reached_goal: bool,
}

pub fn run_episode(world: &MazeWorld, controller: &Controller, horizon: usize, rng: &mut Rng) -> Result<Episode> {
    let mut w = world.clone();
    w.horizon = horizon;
    let mut state = w.reset(rng);
    let mut positions = vec![state.position];
    let mut task_return = 0.0;
    while !state.is_done() {
        let action = match controller {
            Controller::Policy(p) => {
                let a = p.deterministic_action(&state.position)?;
                [a[0], a[1]]
            }
            Controller::Random => [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)],
        };
        let (next, r) = w.step(&state, action_to_velocity(&w, action))?;
        task_return += r;
        state = next;
        positions.push(state.position);
    }
    Ok(Episode {
        positions,
        task_return,
        reached_goal: state.done == Some(DoneReason::Goal),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub avg_dtw: f64,
    pub sal_policy: f64,
    pub sal_expert: f64,
    /// Fraction of evaluation steps spent inside the corridor.
    pub occupancy: f64,
    pub goal_rate: f64,
}

/// Runs `episodes` evaluation episodes, keeps the `top_k` by task return,
/// and scores them against the expert trajectories.
pub fn evaluate(
    world: &MazeWorld,
    controller: &Controller,
    expert: &[Vec<Point>],
    config: &EvalConfig,
    rng: &mut Rng,
) -> Result<EvalReport> {
    if config.episodes == 0 {
        return Err(Error::InvalidArgument("need at least one evaluation episode".into()));
    }
    let episodes: Vec<Episode> = (0..config.episodes)
        .map(|_| run_episode(world, controller, config.horizon, rng))
        .collect::<Result<_>>()?;
    let steps: usize = episodes.iter().map(|e| e.positions.len()).sum();
    let inside: usize = episodes
        .iter()
        .map(|e| e.positions.iter().filter(|p| world.in_corridor(**p)).count())
        .sum();
    let goal_rate = episodes.iter().filter(|e| e.reached_goal).count() as f64 / episodes.len() as f64;
    let returns: Vec<f64> = episodes.iter().map(|e| e.task_return).collect();
    let top = top_k_by_return(&returns, config.top_k)?;
    let policy: Vec<Trajectory<f64>> = top
        .iter()
        .map(|&i| Trajectory::from_points(&episodes[i].positions, config.dt))
        .collect::<Result<_>>()?;
    let experts: Vec<Trajectory<f64>> = expert
        .iter()
        .map(|t| Trajectory::from_points(t, config.dt))
        .collect::<Result<_>>()?;
    let avg_dtw = avg_dtw_pose_error(&policy, &experts)?;
    Ok(EvalReport {
        avg_dtw,
        sal_policy: mean_sal(&policy, &config.sparc)?,
        sal_expert: mean_sal(&experts, &config.sparc)?,
        occupancy: inside as f64 / steps as f64,
        goal_rate,
    })
}

/// Mean spectral arc length over trajectories long enough to score.
fn mean_sal(trajs: &[Trajectory<f64>], params: &SparcParams) -> Result<f64> {
    let scores: Vec<f64> = trajs
        .iter()
        .filter(|t| t.len() >= crate::metrics::MIN_SPARC_SAMPLES)
        .map(|t| spectral_arc_length(t, params))
        .collect::<Result<_>>()?;
    if scores.is_empty() {
        return Ok(f64::NAN);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn write_metrics_csv(rows: &[(String, EvalReport)], mut out: impl Write) -> Result<()> {
    writeln!(out, "checkpoint,avg_dtw,sal_policy,sal_expert")?;
    for (name, r) in rows {
        writeln!(out, "{name},{},{},{}", r.avg_dtw, r.sal_policy, r.sal_expert)?;
    }
    Ok(())
}
