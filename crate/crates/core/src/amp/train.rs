use std::io::Write;

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;

use super::disc::{accuracy, disc_loss, DiscCoeffs, DiscLossParts, Discriminator};
use crate::diffcore::{AdamConfig, AdamState};
use crate::energy::ExpertDataset;
use crate::error::{Error, Result};
use crate::maze::MazeWorld;
use crate::rl::{Agent, IterationStats, RewardWeights, RlConfig, RolloutBuffer};
use crate::rng::{Rng, RngKey};

const STREAM_DISC: u64 = 3;

/// Fixed-capacity ring of feature rows; the oldest rows are overwritten.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    dim: usize,
    capacity: usize,
    data: Vec<f64>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(dim: usize, capacity: usize) -> Result<Self> {
        if dim == 0 || capacity == 0 {
            return Err(Error::InvalidArgument("replay buffer needs positive dim and capacity".into()));
        }
        Ok(ReplayBuffer { dim, capacity, data: Vec::new(), next: 0 })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push_rows(&mut self, rows: ArrayView2<f64>) -> Result<()> {
        if rows.ncols() != self.dim {
            return Err(Error::dim("replay rows", self.dim, rows.ncols()));
        }
        for row in rows.rows() {
            if self.len() < self.capacity {
                self.data.extend(row.iter());
            } else {
                let at = self.next * self.dim;
                self.data[at..at + self.dim].iter_mut().zip(row).for_each(|(d, &v)| *d = v);
            }
            self.next = (self.next + 1) % self.capacity;
        }
        Ok(())
    }

    /// Rows drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Array2<f64>> {
        if self.is_empty() {
            return Err(Error::Empty("replay buffer"));
        }
        let len = self.len();
        let mut out = Array2::zeros((n, self.dim));
        for mut row in out.rows_mut() {
            let i = rng.random_range(0..len) * self.dim;
            row.iter_mut().zip(&self.data[i..i + self.dim]).for_each(|(o, &v)| *o = v);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpConfig {
    pub rl: RlConfig,
    pub disc_hidden: Vec<usize>,
    pub coeffs: DiscCoeffs,
    pub disc_adam: AdamConfig,
    pub disc_batch: usize,
    /// Discriminator updates per policy iteration.
    pub disc_steps: usize,
    pub replay_capacity: usize,
    pub demo_capacity: usize,
}

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig {
            rl: RlConfig {
                weights: RewardWeights::learned_only(),
                ..RlConfig::default()
            },
            disc_hidden: vec![256, 128],
            coeffs: DiscCoeffs::default(),
            disc_adam: AdamConfig::with_lr(1e-4),
            disc_batch: 128,
            disc_steps: 1,
            replay_capacity: 20_000,
            demo_capacity: 20_000,
        }
    }
}

impl AmpConfig {
    pub fn validate(&self) -> Result<()> {
        self.rl.validate()?;
        self.coeffs.validate()?;
        if self.disc_batch == 0 || self.replay_capacity == 0 || self.demo_capacity == 0 {
            return Err(Error::InvalidArgument("discriminator batch and buffer sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpLogRow {
    pub stats: IterationStats,
    /// Accuracy on the last discriminator batch pair, before its update.
    pub disc_accuracy: f64,
    pub disc_loss: f64,
    /// Mean and standard deviation of `D` on the current rollout.
    pub mean_pred: f64,
    pub std_pred: f64,
}

pub fn write_amp_log(rows: &[AmpLogRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "iter,env_steps,mean_raw_return,mean_transformed_return,disc_accuracy,disc_loss,mean_pred,std_pred,policy_loss,value_loss")?;
    for r in rows {
        let s = &r.stats;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.iter,
            s.env_steps,
            s.mean_raw_return,
            s.mean_transformed_return,
            r.disc_accuracy,
            r.disc_loss,
            r.mean_pred,
            r.std_pred,
            s.ppo.policy_loss,
            s.ppo.value_loss
        )?;
    }
    Ok(())
}

/// Adversarial imitation state: policy learner, discriminator and the
/// expert and policy sample buffers.
#[derive(Debug, Clone)]
pub struct AmpTrainer {
    pub agent: Agent,
    pub disc: Discriminator,
    pub disc_adam: AdamState<f64>,
    pub replay: ReplayBuffer,
    pub demo: ExpertDataset<f64>,
    pub config: AmpConfig,
    pub log: Vec<AmpLogRow>,
    key: RngKey,
}

impl AmpTrainer {
    pub fn new(world: &MazeWorld, data: &ExpertDataset<f64>, config: &AmpConfig, key: RngKey) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Empty("expert dataset"));
        }
        let agent = Agent::new(world.clone(), config.rl.clone(), key.child(&[0]))?;
        let mut init = key.stream(&[STREAM_DISC, u64::MAX]);
        let disc = Discriminator::new(data.dim(), &config.disc_hidden, config.coeffs, &mut init)?;
        let disc_adam = AdamState::new(disc.net.num_params(), config.disc_adam);
        let keep = data.len().min(config.demo_capacity);
        let demo = ExpertDataset::new(data.features().slice(ndarray::s![..keep, ..]).to_owned())?;
        Ok(AmpTrainer {
            agent,
            disc,
            disc_adam,
            replay: ReplayBuffer::new(data.dim(), config.replay_capacity)?,
            demo,
            config: config.clone(),
            log: Vec::new(),
            key,
        })
    }

    /// Runs the configured number of discriminator steps on expert rows
    /// against replayed policy rows. Returns accuracy and loss of the last
    /// step, or `None` when no step ran.
    pub fn update_discriminator(&mut self, rng: &mut Rng) -> Result<Option<(f64, DiscLossParts)>> {
        let mut last = None;
        for _ in 0..self.config.disc_steps {
            let idx: Vec<usize> = (0..self.config.disc_batch).map(|_| rng.random_range(0..self.demo.len())).collect();
            let expert = self.demo.select(&idx);
            let policy = self.replay.sample(self.config.disc_batch, rng)?;
            let acc = accuracy(&self.disc, expert.view(), policy.view())?;
            let (parts, grads) = disc_loss(&self.disc, expert.view(), policy.view())?;
            let mut params = self.disc.net.params();
            self.disc_adam.step(&mut params, &grads.flatten())?;
            self.disc.net.set_params(&params)?;
            last = Some((acc, parts));
        }
        Ok(last)
    }

    /// Discriminator rewards for a rollout.
    pub fn rewards(&self, buffer: &RolloutBuffer) -> Result<Vec<f64>> {
        Ok(self.disc.reward(buffer.features().view())?.to_vec())
    }

    /// Rollout, discriminator update, then a policy update on rewards from
    /// the updated discriminator.
    pub fn iterate(&mut self) -> Result<AmpLogRow> {
        let iter = self.agent.iteration() as u64;
        let buffer = self.agent.collect()?;
        let features = buffer.features();
        self.replay.push_rows(features.view())?;
        let mut rng = self.key.stream(&[STREAM_DISC, iter]);
        let (disc_accuracy, disc_loss) = match self.update_discriminator(&mut rng)? {
            Some((acc, parts)) => (acc, parts.total(&self.config.coeffs)),
            None => (f64::NAN, f64::NAN),
        };
        let preds = self.disc.predict(features.view())?;
        let mean_pred = preds.mean().unwrap_or(0.0);
        let std_pred = preds.std(0.0);
        let rewards = self.rewards(&buffer)?;
        let stats = self.agent.learn(&buffer, &rewards)?;
        let row = AmpLogRow { stats, disc_accuracy, disc_loss, mean_pred, std_pred };
        self.log.push(row);
        Ok(row)
    }
}

/// Full adversarial training run over the configured step budget.
pub fn train_amp(world: &MazeWorld, data: &ExpertDataset<f64>, config: &AmpConfig, key: RngKey) -> Result<AmpTrainer> {
    let mut trainer = AmpTrainer::new(world, data, config, key)?;
    for _ in 0..config.rl.iterations() {
        trainer.iterate()?;
    }
    Ok(trainer)
}
