//! Noise-conditioned energy-based annealed rewards (NEAR) for imitation
//! from observation, with an adversarial baseline and evaluation metrics
//! on a 2-D maze domain.

pub mod amp;
pub mod annealing;
pub mod diffcore;
pub mod energy;
pub mod error;
pub mod maze;
pub mod metrics;
pub mod near;
pub mod rl;
pub mod rng;
mod scalar;

pub use error::{Error, Result};
pub use rng::{Rng, RngKey};
pub use scalar::Scalar;

/// Double-precision network, the default throughout the RL stack.
pub type Network = diffcore::DenseNetwork<f64>;
pub type Network32 = diffcore::DenseNetwork<f32>;
