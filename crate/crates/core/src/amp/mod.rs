//! Adversarial imitation baseline: a logit discriminator trained against
//! policy samples, its reward, and diagnostic probes of its behaviour.

mod disc;
mod probe;
mod train;

#[cfg(test)]
mod tests;

pub use disc::{accuracy, disc_loss, disc_reward, DiscCoeffs, DiscLossParts, Discriminator, REWARD_FLOOR};
pub use probe::{
    disjoint_supports, first_perfect_iteration, grad_norm_decay, probe_perfect_discriminator, probe_prediction_variance,
    probe_smoothness, reward_grid, variance_presets, write_grid_csv, write_perfect_disc_csv, write_smoothness_csv,
    write_variance_csv, EnergyAt, GridCell, PerfectDiscConfig, PerfectDiscRow, PointScorer, SmoothnessRow, VariancePreset,
    VarianceRow, GRID_SIDE,
};
pub use train::{train_amp, write_amp_log, AmpConfig, AmpLogRow, AmpTrainer, ReplayBuffer};
