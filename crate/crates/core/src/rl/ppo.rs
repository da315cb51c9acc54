use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;

use super::rollout::rows;
use super::{GaussianPolicy, ValueFunction};
use crate::diffcore::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub td_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            td_lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 256,
            lr: 5e-5,
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.gamma) && unit(self.gae_lambda) && unit(self.td_lambda)) {
            return Err(Error::InvalidArgument("gamma and lambdas must lie in [0, 1]".into()));
        }
        if !(self.clip > 0.0 && self.lr > 0.0) || self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::InvalidArgument("clip, lr, epochs and minibatch must be positive".into()));
        }
        Ok(())
    }
}

/// Flattened on-policy samples for one update.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
    pub advantages: Array1<f64>,
    pub targets: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
}

/// Derivative of `min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)` with
/// respect to `rho`: `A` where the unclipped branch is selected, else zero.
pub fn surrogate_coefficient(ratio: f64, advantage: f64, clip: f64) -> f64 {
    if (advantage > 0.0 && ratio > 1.0 + clip) || (advantage < 0.0 && ratio < 1.0 - clip) {
        0.0
    } else {
        advantage
    }
}

pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Policy and value optimizers with their networks.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoLearner {
    pub policy: GaussianPolicy,
    pub value: ValueFunction,
    pub policy_adam: AdamState<f64>,
    pub value_adam: AdamState<f64>,
    pub config: PpoConfig,
}

impl PpoLearner {
    pub fn new(policy: GaussianPolicy, value: ValueFunction, config: PpoConfig) -> Result<Self> {
        config.validate()?;
        let adam = AdamConfig::with_lr(config.lr);
        Ok(PpoLearner {
            policy_adam: AdamState::new(policy.net.num_params(), adam),
            value_adam: AdamState::new(value.net.num_params(), adam),
            policy,
            value,
            config,
        })
    }

    /// Clipped-surrogate policy step and squared-error value step per
    /// shuffled minibatch, for the configured number of epochs.
    pub fn update(&mut self, batch: &PpoBatch, rng: &mut Rng) -> Result<PpoStats> {
        let n = batch.states.nrows();
        if n == 0 {
            return Err(Error::Empty("ppo batch"));
        }
        let advantages = if self.config.normalize_advantages {
            normalize(batch.advantages.view())
        } else {
            batch.advantages.clone()
        };
        let mut order: Vec<usize> = (0..n).collect();
        let mut stats = PpoStats::default();
        let mut count = 0usize;
        let mut clipped = 0usize;
        for _ in 0..self.config.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(self.config.minibatch) {
                let states = rows(batch.states.view(), chunk);
                let actions = rows(batch.actions.view(), chunk);
                let adv: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();
                let old: Vec<f64> = chunk.iter().map(|&i| batch.log_probs[i]).collect();
                let targets: Vec<f64> = chunk.iter().map(|&i| batch.targets[i]).collect();
                let (pl, nclip) = self.policy_step(states.view(), actions.view(), &old, &adv)?;
                let vl = self.value_step(states.view(), &targets)?;
                stats.policy_loss += pl * chunk.len() as f64;
                stats.value_loss += vl * chunk.len() as f64;
                clipped += nclip;
                count += chunk.len();
            }
        }
        let c = count as f64;
        stats.policy_loss /= c;
        stats.value_loss /= c;
        stats.clip_fraction = clipped as f64 / c;
        if !(stats.policy_loss.is_finite() && stats.value_loss.is_finite()) {
            return Err(Error::NonFinite("ppo loss".into()));
        }
        Ok(stats)
    }

    fn policy_step(&mut self, states: ArrayView2<f64>, actions: ArrayView2<f64>, old: &[f64], adv: &[f64]) -> Result<(f64, usize)> {
        let m = states.nrows() as f64;
        let clip = self.config.clip;
        let tape = self.policy.net.record(self.policy.inputs(states)?.view())?;
        let mean = tape.output().clone();
        let logp = self.policy.log_prob(mean.view(), actions)?;
        let var: Vec<f64> = self.policy.log_std().iter().map(|ls| (2.0 * ls).exp()).collect();
        let mut adjoint = Array2::zeros(mean.raw_dim());
        let mut loss = 0.0;
        let mut nclip = 0;
        for b in 0..mean.nrows() {
            let ratio = (logp[b] - old[b]).exp();
            loss -= clipped_surrogate(ratio, adv[b], clip) / m;
            if (ratio - 1.0).abs() > clip {
                nclip += 1;
            }
            // d(-surrogate)/dmu = -coef * rho * (a - mu) / var / m
            let coef = surrogate_coefficient(ratio, adv[b], clip) * ratio / m;
            for j in 0..mean.ncols() {
                adjoint[[b, j]] = -coef * (actions[[b, j]] - mean[[b, j]]) / var[j];
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("ppo policy loss".into()));
        }
        let grads = self.policy.net.param_gradient_from(&tape, adjoint.view())?;
        let mut params = self.policy.net.params();
        self.policy_adam.step(&mut params, &grads.flatten())?;
        self.policy.net.set_params(&params)?;
        Ok((loss, nclip))
    }

    fn value_step(&mut self, states: ArrayView2<f64>, targets: &[f64]) -> Result<f64> {
        let m = states.nrows() as f64;
        let tape = self.value.net.record(self.value.inputs(states)?.view())?;
        let out = tape.output();
        let mut adjoint = Array2::zeros(out.raw_dim());
        let mut loss = 0.0;
        for b in 0..out.nrows() {
            let r = out[[b, 0]] - targets[b];
            loss += r * r / m;
            adjoint[[b, 0]] = 2.0 * r / m;
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("ppo value loss".into()));
        }
        let grads = self.value.net.param_gradient_from(&tape, adjoint.view())?;
        let mut params = self.value.net.params();
        self.value_adam.step(&mut params, &grads.flatten())?;
        self.value.net.set_params(&params)?;
        Ok(loss)
    }
}

/// Zero mean, unit standard deviation (left centered when constant).
pub fn normalize(x: ArrayView1<f64>) -> Array1<f64> {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-12 {
        x.mapv(|v| (v - mean) / std)
    } else {
        x.mapv(|v| v - mean)
    }
}
