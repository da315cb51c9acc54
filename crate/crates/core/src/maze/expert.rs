use rand_distr::{Distribution, Normal};

use super::world::{dist, MazeWorld, Point};
use crate::energy::ExpertDataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertConfig {
    pub episodes: usize,
    /// Per-axis Gaussian action noise.
    pub noise_std: f64,
    pub waypoints: Vec<Point>,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        ExpertConfig {
            episodes: 200,
            noise_std: 0.05,
            waypoints: vec![[1.5, 9.0], [1.5, 1.5], [9.0, 1.5]],
        }
    }
}

/// Scripted waypoint follower: each step heads for the current waypoint at
/// full speed (shortened on the final approach), plus clamped noise.
pub fn expert_episode(world: &MazeWorld, config: &ExpertConfig, rng: &mut Rng) -> Result<Vec<Point>> {
    if config.waypoints.is_empty() {
        return Err(Error::Empty("expert waypoints"));
    }
    let noise = Normal::new(0.0, config.noise_std).map_err(|e| Error::InvalidArgument(format!("expert noise: {e}")))?;
    let mut state = world.reset(rng);
    let mut path = vec![state.position];
    let mut target = 0;
    let last = config.waypoints.len() - 1;
    while !state.is_done() {
        let p = state.position;
        // advance once inside the next waypoint's approach radius
        while target < last && dist(p, config.waypoints[target]) <= world.max_speed / 2.0 {
            target += 1;
        }
        let w = config.waypoints[target];
        let d = dist(p, w);
        let speed = world.max_speed.min(d);
        let dir = if d > 0.0 { [(w[0] - p[0]) / d, (w[1] - p[1]) / d] } else { [0.0, 0.0] };
        let action = [dir[0] * speed + noise.sample(rng), dir[1] * speed + noise.sample(rng)];
        state = world.step(&state, action)?.0;
        path.push(state.position);
    }
    Ok(path)
}

/// Expert trajectories with their transition dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDemos {
    pub trajectories: Vec<Vec<Point>>,
}

impl ExpertDemos {
    pub fn num_transitions(&self) -> usize {
        self.trajectories.iter().map(|t| t.len().saturating_sub(1)).sum()
    }

    pub fn dataset(&self) -> Result<ExpertDataset<f64>> {
        let rows: Vec<Vec<f64>> = self
            .trajectories
            .iter()
            .flat_map(|t| t.windows(2).map(|w| vec![w[0][0], w[0][1], w[1][0], w[1][1]]))
            .collect();
        ExpertDataset::from_rows(&rows)
    }
}

pub fn generate_expert(world: &MazeWorld, config: &ExpertConfig, rng: &mut Rng) -> Result<ExpertDemos> {
    if config.episodes == 0 {
        return Err(Error::InvalidArgument("expert episodes must be at least 1".into()));
    }
    let trajectories = (0..config.episodes)
        .map(|_| expert_episode(world, config, rng))
        .collect::<Result<_>>()?;
    Ok(ExpertDemos { trajectories })
}

/// Splits a transition table back into trajectories by chaining rows whose
/// start equals the previous row's end.
pub fn trajectories_from_transitions(data: &ExpertDataset<f64>) -> Result<Vec<Vec<Point>>> {
    if data.dim() != 4 {
        return Err(Error::dim("maze transition", 4, data.dim()));
    }
    let mut out: Vec<Vec<Point>> = Vec::new();
    for r in data.features().rows() {
        let (s, s_next) = ([r[0], r[1]], [r[2], r[3]]);
        match out.last_mut() {
            Some(t) if *t.last().expect("nonempty") == s => t.push(s_next),
            _ => out.push(vec![s, s_next]),
        }
    }
    Ok(out)
}
