use std::io::Write;
use std::path::Path;

use rand::Rng as _;

use super::{dsm_minibatch_loss_weighted, DsmWeighting, EnergyArch, EnergyModel, ExpertDataset, LevelSampling, NoiseScale, Standardization};
use crate::diffcore::{AdamConfig, AdamState, Checkpoint};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrainConfig {
    pub arch: EnergyArch,
    pub iterations: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub ema_decay: f64,
    /// Loss is recorded every `log_every` iterations (and on the last one).
    pub log_every: usize,
    pub levels: LevelSampling,
    pub weighting: DsmWeighting,
}

impl Default for EnergyTrainConfig {
    fn default() -> Self {
        EnergyTrainConfig {
            arch: EnergyArch::default(),
            iterations: 20_000,
            batch_size: 128,
            adam: AdamConfig::with_lr(1e-5),
            ema_decay: 0.999,
            log_every: 100,
            levels: LevelSampling::Uniform,
            weighting: DsmWeighting::Unweighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iter: usize,
    pub sigma_level_mean: f64,
    pub loss: f64,
}

/// Trained energy with the optimizer state needed to resume.
#[derive(Debug, Clone)]
pub struct TrainedEnergy<T> {
    pub model: EnergyModel<T>,
    pub adam: AdamState<T>,
    pub scale: NoiseScale,
    pub log: Vec<LossRecord>,
}

/// Fits standardization, initializes the network, then runs DSM with Adam
/// and an EMA shadow update every iteration.
pub fn train_energy<T: Scalar>(
    dataset: &ExpertDataset<T>,
    scale: &NoiseScale,
    config: &EnergyTrainConfig,
    rng: &mut Rng,
) -> Result<TrainedEnergy<T>> {
    let model = EnergyModel::new(&config.arch, Standardization::fit(dataset), config.ema_decay, rng)?;
    continue_training(model, dataset, scale, config, rng)
}

/// Runs the DSM loop from an existing model with a fresh optimizer.
pub fn continue_training<T: Scalar>(
    mut model: EnergyModel<T>,
    dataset: &ExpertDataset<T>,
    scale: &NoiseScale,
    config: &EnergyTrainConfig,
    rng: &mut Rng,
) -> Result<TrainedEnergy<T>> {
    if dataset.is_empty() {
        return Err(Error::Empty("expert dataset"));
    }
    if dataset.dim() != model.dim() {
        return Err(Error::dim("expert dataset", model.dim(), dataset.dim()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut params = model.network(super::Weights::Live).params();
    let mut adam = AdamState::new(params.len(), config.adam);
    let mut log = Vec::new();
    let log_every = config.log_every.max(1);
    let mut indices = vec![0usize; config.batch_size];
    for iter in 0..config.iterations {
        for i in indices.iter_mut() {
            *i = rng.random_range(0..dataset.len());
        }
        let batch = dataset.select(&indices);
        let out = dsm_minibatch_loss_weighted(&model, batch.view(), &config.levels, scale, config.weighting, rng).map_err(|e| match e {
            Error::NonFinite(_) => Error::NonFinite(format!("dsm loss diverged at iteration {iter}")),
            other => other,
        })?;
        adam.step(&mut params, &out.gradients.flatten())?;
        model.update_live(&params)?;
        if (iter + 1) % log_every == 0 || iter + 1 == config.iterations {
            log.push(LossRecord {
                iter: iter + 1,
                sigma_level_mean: out.level_mean,
                loss: out.loss.f64(),
            });
        }
    }
    Ok(TrainedEnergy {
        model,
        adam,
        scale: scale.clone(),
        log,
    })
}

pub fn write_loss_csv(log: &[LossRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "iter,sigma_level_mean,loss")?;
    for r in log {
        writeln!(out, "{},{},{}", r.iter, r.sigma_level_mean, r.loss)?;
    }
    Ok(())
}

const ADAM: [u8; 4] = *b"ADAM";
const SCALE: [u8; 4] = *b"SCAL";
const CONV: [u8; 4] = *b"CONV";

/// Convention flags stored with every energy checkpoint.
/// Bit 0: target points from x' back to x. Bit 1: energy divided by sigma.
pub const CONVENTION_FLAGS: u32 = 0b11;

impl<T: Scalar> TrainedEnergy<T> {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        self.model.write_sections(&mut ck);
        ck.put_adam(ADAM, &self.adam);
        ck.put_vector(SCALE, self.scale.sigmas());
        ck.put_flags(CONV, CONVENTION_FLAGS);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let flags = ck.flags(CONV)?;
        if flags != CONVENTION_FLAGS {
            return Err(Error::Format(format!("unsupported energy conventions {flags:#b}")));
        }
        let model = EnergyModel::read_sections(ck)?;
        let adam = ck.adam(ADAM)?;
        let scale = NoiseScale::from_sigmas(ck.vector(SCALE)?)?;
        Ok(TrainedEnergy {
            model,
            adam,
            scale,
            log: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        TrainedEnergy::from_checkpoint(&Checkpoint::load(path)?)
    }
}
