use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

pub type Point = [f64; 2];

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x: [x0, x1], y: [y0, y1] }
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.y[0] && p[1] <= self.y[1]
    }

    pub fn clamp(&self, p: Point) -> Point {
        [p[0].clamp(self.x[0], self.x[1]), p[1].clamp(self.y[0], self.y[1])]
    }

    pub fn center(&self) -> Point {
        [(self.x[0] + self.x[1]) / 2.0, (self.y[0] + self.y[1]) / 2.0]
    }

    fn valid(&self) -> bool {
        self.x[0] <= self.x[1] && self.y[0] <= self.y[1] && self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }
}

/// L-shaped corridor maze with a point agent under velocity commands.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeWorld {
    pub arena: Rect,
    /// Vertical then horizontal leg; the free space is their union.
    pub corridor: [Rect; 2],
    pub start: Rect,
    pub goal: Point,
    pub goal_threshold: f64,
    pub max_speed: f64,
    pub horizon: usize,
}

impl Default for MazeWorld {
    fn default() -> Self {
        MazeWorld {
            arena: Rect::new(0.0, 10.0, 0.0, 10.0),
            corridor: [Rect::new(0.5, 2.5, 0.5, 10.0), Rect::new(0.5, 9.5, 0.5, 2.5)],
            start: Rect::new(1.0, 2.0, 8.5, 9.5),
            goal: [9.0, 1.5],
            goal_threshold: 0.3,
            max_speed: 0.5,
            horizon: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoneReason {
    Goal,
    Horizon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeState {
    pub position: Point,
    pub steps: usize,
    pub done: Option<DoneReason>,
}

impl EpisodeState {
    pub fn is_done(&self) -> bool {
        self.done.is_some()
    }
}

impl MazeWorld {
    /// Checks the geometric invariants; call after applying overrides.
    pub fn validate(&self) -> Result<()> {
        let boxes = [self.arena, self.corridor[0], self.corridor[1], self.start];
        if boxes.iter().any(|r| !r.valid()) {
            return Err(Error::InvalidArgument("maze boxes must be finite and ordered".into()));
        }
        if !(self.goal_threshold > 0.0 && self.max_speed > 0.0) {
            return Err(Error::InvalidArgument("goal threshold and max speed must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if !self.in_corridor(self.goal) {
            return Err(Error::InvalidArgument("goal outside corridor".into()));
        }
        let s = self.start;
        let corners = [[s.x[0], s.y[0]], [s.x[0], s.y[1]], [s.x[1], s.y[0]], [s.x[1], s.y[1]]];
        if !self.corridor.iter().any(|c| corners.iter().all(|&p| c.contains(p))) {
            return Err(Error::InvalidArgument("start window outside corridor".into()));
        }
        Ok(())
    }

    pub fn in_corridor(&self, p: Point) -> bool {
        self.corridor.iter().any(|c| c.contains(p))
    }

    pub fn reset(&self, rng: &mut Rng) -> EpisodeState {
        let position = [
            rng.random_range(self.start.x[0]..=self.start.x[1]),
            rng.random_range(self.start.y[0]..=self.start.y[1]),
        ];
        EpisodeState { position, steps: 0, done: None }
    }

    /// Clamps `action` to the speed box, moves, and projects back onto the
    /// corridor leg(s) holding the current position.
    pub fn step(&self, state: &EpisodeState, action: Point) -> Result<(EpisodeState, f64)> {
        if state.is_done() {
            return Err(Error::EpisodeDone);
        }
        if !(action[0].is_finite() && action[1].is_finite()) {
            return Err(Error::NonFinite("maze action".into()));
        }
        let v = self.max_speed;
        let a = [action[0].clamp(-v, v), action[1].clamp(-v, v)];
        let candidate = [state.position[0] + a[0], state.position[1] + a[1]];
        let position = self.project(state.position, candidate);
        let steps = state.steps + 1;
        let done = if dist(position, self.goal) <= self.goal_threshold {
            Some(DoneReason::Goal)
        } else if steps >= self.horizon {
            Some(DoneReason::Horizon)
        } else {
            None
        };
        let reward = self.task_reward(state.position, position);
        Ok((EpisodeState { position, steps, done }, reward))
    }

    fn project(&self, from: Point, candidate: Point) -> Point {
        if self.in_corridor(candidate) {
            return candidate;
        }
        let mut best = from;
        let mut best_d = f64::INFINITY;
        for leg in self.corridor.iter().filter(|c| c.contains(from)) {
            let p = leg.clamp(candidate);
            let d = dist(p, candidate);
            if d < best_d {
                best = p;
                best_d = d;
            }
        }
        best
    }

    /// Normalized progress toward the goal, clipped to `[0, 1]`.
    pub fn task_reward(&self, s: Point, s_next: Point) -> f64 {
        ((dist(s, self.goal) - dist(s_next, self.goal)) / self.max_speed).clamp(0.0, 1.0)
    }
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
