use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::Scalar;

/// Positions sampled every `dt` seconds, one row per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    samples: Array2<T>,
    dt: f64,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(samples: Array2<T>, dt: f64) -> Result<Self> {
        if samples.nrows() < 2 {
            return Err(Error::InvalidArgument(format!("trajectory needs at least 2 samples, got {}", samples.nrows())));
        }
        if samples.ncols() == 0 {
            return Err(Error::Empty("trajectory coordinates"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory samples".into()));
        }
        Ok(Trajectory { samples, dt })
    }

    pub fn from_points(points: &[[T; 2]], dt: f64) -> Result<Self> {
        let samples = Array2::from_shape_fn((points.len(), 2), |(i, j)| points[i][j]);
        Trajectory::new(samples, dt)
    }

    pub fn samples(&self) -> ArrayView2<'_, T> {
        self.samples.view()
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// Subtracts body `root` (of `body_dim` coordinates) from every body block
/// at each timestep.
pub fn root_relative<T: Scalar>(traj: &Trajectory<T>, root: usize, body_dim: usize) -> Result<Trajectory<T>> {
    let d = traj.dim();
    if body_dim == 0 || !d.is_multiple_of(body_dim) {
        return Err(Error::InvalidArgument(format!("{d} coordinates do not split into bodies of {body_dim}")));
    }
    let bodies = d / body_dim;
    if root >= bodies {
        return Err(Error::InvalidArgument(format!("root body {root} out of range for {bodies} bodies")));
    }
    let r = traj.samples.slice(s![.., root * body_dim..(root + 1) * body_dim]).to_owned();
    let mut out = traj.samples.clone();
    for b in 0..bodies {
        let mut block = out.slice_mut(s![.., b * body_dim..(b + 1) * body_dim]);
        block -= &r;
    }
    Ok(Trajectory { samples: out, dt: traj.dt })
}
