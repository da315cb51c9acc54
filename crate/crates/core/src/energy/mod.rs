//! Noise-conditioned energy model trained by denoising score matching.

mod dataset;
mod dsm;
mod model;
mod scale;
mod train;

pub use dataset::ExpertDataset;
pub use dsm::{
    dsm_loss_weighted, dsm_loss_with_noise, dsm_minibatch_loss, dsm_minibatch_loss_weighted, standard_normal, DsmOutput, DsmWeighting,
    LevelSampling,
};
pub use model::{random_unit_rows, ring_energy_profile, EnergyArch, EnergyModel, Standardization, Weights, MIN_STD};
pub use scale::NoiseScale;
pub use train::{continue_training, train_energy, write_loss_csv, EnergyTrainConfig, LossRecord, TrainedEnergy, CONVENTION_FLAGS};
