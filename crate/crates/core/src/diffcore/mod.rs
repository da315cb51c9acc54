//! Dense networks with exact reverse-mode derivatives, Adam, EMA and
//! checkpoint persistence.
//!
//! Besides ordinary parameter gradients, networks with a scalar output can
//! differentiate losses that are themselves functions of the input
//! gradient, which is what score matching on an energy network requires.

mod activation;
mod adam;
pub mod checkpoint;
mod ema;
mod init;
mod network;

pub use activation::{sigmoid, Activation};
pub use adam::{AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use ema::EmaState;
pub use init::{xavier_bound, xavier_uniform};
pub use network::{Dense, DenseNetwork, Gradients, Tape};
