use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::disc::{accuracy, disc_loss, softplus, DiscCoeffs, Discriminator};
use super::train::AmpTrainer;
use crate::diffcore::{AdamConfig, AdamState};
use crate::energy::{EnergyModel, Weights};
use crate::error::{Error, Result};
use crate::maze::{features, MazeWorld, Point};
use crate::rl::{action_to_velocity, GaussianPolicy};
use crate::rng::{Rng, RngKey};

const STREAM_VARIANCE: u64 = 4;

/// Retraining schedule for the perfect-discriminator probe.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfectDiscConfig {
    pub iterations: usize,
    pub hidden: Vec<usize>,
    /// Plain cross-entropy by default.
    pub coeffs: DiscCoeffs,
    pub adam: AdamConfig,
    pub batch_size: usize,
}

impl Default for PerfectDiscConfig {
    fn default() -> Self {
        PerfectDiscConfig {
            iterations: 300,
            hidden: vec![64, 64],
            coeffs: DiscCoeffs::bce_only(),
            adam: AdamConfig::with_lr(1e-3),
            batch_size: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfectDiscRow {
    pub iter: usize,
    pub accuracy: f64,
    pub bce: f64,
    /// Mean `|grad_x D|` over expert and policy rows.
    pub grad_norm: f64,
}

/// Expert rows uniform on `-1 +- 0.01`, policy rows on `1 +- 0.01`.
pub fn disjoint_supports(n: usize, rng: &mut Rng) -> (Array2<f64>, Array2<f64>) {
    let expert = Array2::from_shape_fn((n, 1), |_| -1.0 + rng.random_range(-0.01..=0.01));
    let policy = Array2::from_shape_fn((n, 1), |_| 1.0 + rng.random_range(-0.01..=0.01));
    (expert, policy)
}

fn mean_bce(disc: &Discriminator, expert: ArrayView2<f64>, policy: ArrayView2<f64>) -> Result<f64> {
    let d = disc.logits(expert)?.mapv(|l| softplus(-l)).mean().unwrap_or(0.0);
    let g = disc.logits(policy)?.mapv(softplus).mean().unwrap_or(0.0);
    Ok(d + g)
}

/// Trains a fresh discriminator on fixed expert and policy samples and
/// records full-set accuracy, cross-entropy and input-gradient norm after
/// every update. Row 0 is the untrained state.
pub fn probe_perfect_discriminator(
    expert: ArrayView2<f64>,
    policy: ArrayView2<f64>,
    config: &PerfectDiscConfig,
    rng: &mut Rng,
) -> Result<Vec<PerfectDiscRow>> {
    if expert.is_empty() || policy.is_empty() {
        return Err(Error::Empty("probe samples"));
    }
    if expert.ncols() != policy.ncols() {
        return Err(Error::dim("probe policy samples", expert.ncols(), policy.ncols()));
    }
    let mut disc = Discriminator::new(expert.ncols(), &config.hidden, config.coeffs, rng)?;
    let mut adam = AdamState::new(disc.net.num_params(), config.adam);
    let both = ndarray::concatenate(Axis(0), &[expert, policy]).expect("matching columns");
    let record = |disc: &Discriminator, iter: usize| -> Result<PerfectDiscRow> {
        Ok(PerfectDiscRow {
            iter,
            accuracy: accuracy(disc, expert, policy)?,
            bce: mean_bce(disc, expert, policy)?,
            grad_norm: disc.prob_grad_norms(both.view())?.mean().unwrap_or(0.0),
        })
    };
    let mut rows = vec![record(&disc, 0)?];
    for iter in 1..=config.iterations {
        let pick = |m: ArrayView2<f64>, rng: &mut Rng| {
            let idx: Vec<usize> = (0..config.batch_size).map(|_| rng.random_range(0..m.nrows())).collect();
            m.select(Axis(0), &idx)
        };
        let eb = pick(expert, rng);
        let pb = pick(policy, rng);
        let (_, grads) = disc_loss(&disc, eb.view(), pb.view())?;
        let mut params = disc.net.params();
        adam.step(&mut params, &grads.flatten())?;
        disc.net.set_params(&params)?;
        rows.push(record(&disc, iter)?);
    }
    Ok(rows)
}

/// First iteration at which accuracy reaches 1.
pub fn first_perfect_iteration(rows: &[PerfectDiscRow]) -> Option<usize> {
    rows.iter().find(|r| r.accuracy >= 1.0).map(|r| r.iter)
}

/// Peak gradient norm divided by the final one.
pub fn grad_norm_decay(rows: &[PerfectDiscRow]) -> f64 {
    let peak = rows.iter().map(|r| r.grad_norm).fold(0.0, f64::max);
    let last = rows.last().map_or(0.0, |r| r.grad_norm);
    peak / last
}

pub fn write_perfect_disc_csv(rows: &[PerfectDiscRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "iter,accuracy,bce,grad_norm")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.iter, r.accuracy, r.bce, r.grad_norm)?;
    }
    Ok(())
}

/// Cut-off for the variance probe, as a fraction of the step budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariancePreset {
    pub cutoff_fraction: f64,
    /// Keep training the discriminator between rollouts.
    pub continue_disc: bool,
}

/// Early, middle and full-budget cut-offs with continued discriminator
/// training.
pub fn variance_presets() -> [VariancePreset; 3] {
    [0.2, 0.5, 1.0].map(|f| VariancePreset { cutoff_fraction: f, continue_disc: true })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRow {
    pub rollout: usize,
    pub mean_reward: f64,
    /// Standard deviation of `mean_reward` over rollouts `0..=rollout`.
    pub std_so_far: f64,
}

/// One stochastic episode from the frozen policy; returns its transition
/// features.
fn sample_episode(world: &MazeWorld, policy: &GaussianPolicy, rng: &mut Rng) -> Result<Array2<f64>> {
    let mut state = world.reset(rng);
    let mut rows = Vec::new();
    while !state.is_done() {
        let (a, _) = policy.sample_action(&state.position, rng)?;
        let (next, _) = world.step(&state, action_to_velocity(world, [a[0], a[1]]))?;
        rows.extend(features(state.position, next.position));
        state = next;
    }
    Ok(Array2::from_shape_vec((rows.len() / 4, 4), rows).expect("four features"))
}

/// Discriminator reward on `n_rollouts` episodes of the frozen policy,
/// optionally updating the discriminator on each episode in turn.
pub fn probe_prediction_variance(
    trainer: &mut AmpTrainer,
    n_rollouts: usize,
    continue_disc: bool,
    key: RngKey,
) -> Result<Vec<VarianceRow>> {
    let world = trainer.agent.env.world.clone();
    let mut means = Vec::with_capacity(n_rollouts);
    let mut rows = Vec::with_capacity(n_rollouts);
    for k in 0..n_rollouts {
        let mut rng = key.stream(&[STREAM_VARIANCE, k as u64]);
        let feats = sample_episode(&world, &trainer.agent.learner.policy, &mut rng)?;
        let mean_reward = trainer.disc.reward(feats.view())?.mean().unwrap_or(0.0);
        means.push(mean_reward);
        rows.push(VarianceRow { rollout: k, mean_reward, std_so_far: Array1::from(means.clone()).std(0.0) });
        if continue_disc {
            trainer.replay.push_rows(feats.view())?;
            trainer.update_discriminator(&mut rng)?;
        }
    }
    Ok(rows)
}

pub fn write_variance_csv(rows: &[VarianceRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "rollout,mean_reward,std_so_far")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.rollout, r.mean_reward, r.std_so_far)?;
    }
    Ok(())
}

/// Any model scoring rows of transition features.
pub trait PointScorer {
    fn score_points(&self, x: ArrayView2<f64>) -> Result<Array1<f64>>;
}

impl PointScorer for Discriminator {
    /// The probability `D`.
    fn score_points(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.predict(x)
    }
}

/// EMA conditional energy at one noise level.
#[derive(Debug, Clone, Copy)]
pub struct EnergyAt<'a> {
    pub model: &'a EnergyModel<f64>,
    pub sigma: f64,
}

impl PointScorer for EnergyAt<'_> {
    fn score_points(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.model.conditional_energy_batch(x, self.sigma, Weights::Ema)
    }
}

impl<F: Fn(ArrayView2<f64>) -> Array1<f64>> PointScorer for F {
    fn score_points(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessRow {
    pub radius: f64,
    pub mean_pred: f64,
    pub std_pred: f64,
}

/// Model output on expert rows perturbed by isotropic Gaussian noise of
/// standard deviation `radius`, one row per radius.
pub fn probe_smoothness(model: &dyn PointScorer, data: ArrayView2<f64>, radii: &[f64], rng: &mut Rng) -> Result<Vec<SmoothnessRow>> {
    if data.is_empty() {
        return Err(Error::Empty("smoothness data"));
    }
    if let Some(r) = radii.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::InvalidArgument(format!("radius must be non-negative, got {r}")));
    }
    radii
        .iter()
        .map(|&radius| {
            let x = data.mapv(|v| {
                let z: f64 = StandardNormal.sample(rng);
                v + radius * z
            });
            let pred = model.score_points(x.view())?;
            if pred.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite(format!("model output at radius {radius}")));
            }
            Ok(SmoothnessRow { radius, mean_pred: pred.mean().unwrap_or(0.0), std_pred: pred.std(0.0) })
        })
        .collect()
}

pub fn write_smoothness_csv(rows: &[SmoothnessRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "radius,mean_pred,std_pred")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.radius, r.mean_pred, r.std_pred)?;
    }
    Ok(())
}

/// Lattice side of the reward heatmap.
pub const GRID_SIDE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub mean_reward: f64,
}

/// Model output for transitions from the fixed state `s` to every point
/// of an `n x n` lattice spanning `lo..=hi`, in row-major order over `y`
/// then `x`.
pub fn reward_grid(model: &dyn PointScorer, s: Point, lo: Point, hi: Point, n: usize) -> Result<Vec<GridCell>> {
    if n < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points per side".into()));
    }
    let at = |i: usize, d: usize| lo[d] + (hi[d] - lo[d]) * i as f64 / (n - 1) as f64;
    let mut x = Array2::zeros((n * n, 4));
    for (k, mut row) in x.rows_mut().into_iter().enumerate() {
        let next = [at(k % n, 0), at(k / n, 1)];
        row.assign(&Array1::from(features(s, next).to_vec()));
    }
    let pred = model.score_points(x.view())?;
    Ok(x.rows()
        .into_iter()
        .zip(&pred)
        .map(|(r, &v)| GridCell { x: r[2], y: r[3], mean_reward: v })
        .collect())
}

pub fn write_grid_csv(cells: &[GridCell], mut out: impl Write) -> Result<()> {
    writeln!(out, "x,y,mean_reward")?;
    for c in cells {
        writeln!(out, "{},{},{}", c.x, c.y, c.mean_reward)?;
    }
    Ok(())
}
