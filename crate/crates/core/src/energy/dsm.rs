use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{EnergyModel, NoiseScale, Weights};
use crate::diffcore::Gradients;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::Scalar;

/// Loss value, exact live-parameter gradients and the mean assigned level.
#[derive(Debug, Clone)]
pub struct DsmOutput<T> {
    pub loss: T,
    pub gradients: Gradients<T>,
    pub level_mean: f64,
}

/// Per-level multiplier on the DSM loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DsmWeighting {
    /// Every level counts equally, so small levels dominate through their
    /// `1 / sigma^2` residual scale.
    #[default]
    Unweighted,
    /// Level `k` is scaled by `sigma_k^2`, which equalizes residual
    /// magnitudes across levels.
    SigmaSquared,
}

impl DsmWeighting {
    pub fn factor(self, sigma: f64) -> f64 {
        match self {
            DsmWeighting::Unweighted => 1.0,
            DsmWeighting::SigmaSquared => sigma * sigma,
        }
    }
}

/// DSM loss on clean samples `x` with explicit level assignment and unit
/// Gaussian noise `eps`. Each sample is perturbed to `x + sigma * eps` and
/// its score regressed onto `(x - x') / sigma^2`. Per-sample losses are
/// averaged within each level, then across the levels present.
pub fn dsm_loss_with_noise<T: Scalar>(
    model: &EnergyModel<T>,
    x: ArrayView2<T>,
    levels: &[usize],
    scale: &NoiseScale,
    eps: ArrayView2<T>,
) -> Result<DsmOutput<T>> {
    dsm_loss_weighted(model, x, levels, scale, eps, DsmWeighting::Unweighted)
}

/// [`dsm_loss_with_noise`] with each level's average scaled by `weighting`.
pub fn dsm_loss_weighted<T: Scalar>(
    model: &EnergyModel<T>,
    x: ArrayView2<T>,
    levels: &[usize],
    scale: &NoiseScale,
    eps: ArrayView2<T>,
    weighting: DsmWeighting,
) -> Result<DsmOutput<T>> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(Error::Empty("dsm batch"));
    }
    if d != model.dim() {
        return Err(Error::dim("dsm batch", model.dim(), d));
    }
    if levels.len() != n {
        return Err(Error::dim("dsm levels", n, levels.len()));
    }
    if eps.dim() != (n, d) {
        return Err(Error::dim("dsm noise", n * d, eps.len()));
    }
    if let Some(&bad) = levels.iter().find(|&&k| k >= scale.len()) {
        return Err(Error::InvalidArgument(format!("noise level {bad} out of range")));
    }

    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &k in levels {
        *counts.entry(k).or_default() += 1;
    }
    let present = counts.len() as f64;
    let weight: Vec<T> = levels
        .iter()
        .map(|&k| T::of(weighting.factor(scale.sigma(k)) / (present * counts[&k] as f64)))
        .collect();
    let sigma: Vec<T> = levels.iter().map(|&k| T::of(scale.sigma(k))).collect();

    // x' and the standardized network input
    let mut perturbed = eps.to_owned();
    for (b, mut row) in perturbed.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|e| e * sigma[b]);
    }
    perturbed += &x;
    let std = model.standardization().std().clone();
    let z = model.standardization().apply(perturbed.view());

    let net = model.network(Weights::Live);
    let half = T::of(0.5);
    let (loss, gradients) = net.param_grad_of_input_grad_loss_batch(z.view(), |g| {
        let mut total = T::zero();
        let mut adjoint = Array2::zeros(g.raw_dim());
        for b in 0..n {
            let s = sigma[b];
            let mut sq = T::zero();
            for j in 0..d {
                let scale_j = s * std[j];
                // target (x - x') / sigma^2 = -eps / sigma
                let target = -eps[[b, j]] / s;
                let r = target - g[[b, j]] / scale_j;
                sq += r * r;
                adjoint[[b, j]] = -weight[b] * r / scale_j;
            }
            total += weight[b] * half * sq;
        }
        (total, adjoint)
    })?;
    if !loss.is_finite() || !gradients.is_finite() {
        return Err(Error::NonFinite("dsm loss".into()));
    }
    let level_mean = levels.iter().sum::<usize>() as f64 / n as f64;
    Ok(DsmOutput { loss, gradients, level_mean })
}

/// How noise levels are assigned to batch samples.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LevelSampling {
    /// Uniform over every level of the scale.
    #[default]
    Uniform,
    /// Uniform over the listed level indices.
    Only(Vec<usize>),
}

impl LevelSampling {
    pub fn draw(&self, scale: &NoiseScale, n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        match self {
            LevelSampling::Uniform => Ok((0..n).map(|_| rng.random_range(0..scale.len())).collect()),
            LevelSampling::Only(levels) => {
                if levels.is_empty() {
                    return Err(Error::Empty("level subset"));
                }
                if let Some(&bad) = levels.iter().find(|&&k| k >= scale.len()) {
                    return Err(Error::InvalidArgument(format!("noise level {bad} out of range")));
                }
                Ok((0..n).map(|_| levels[rng.random_range(0..levels.len())]).collect())
            }
        }
    }
}

/// Draws the level assignment and Gaussian noise, then evaluates
/// [`dsm_loss_with_noise`].
pub fn dsm_minibatch_loss<T: Scalar>(
    model: &EnergyModel<T>,
    batch: ArrayView2<T>,
    sampling: &LevelSampling,
    scale: &NoiseScale,
    rng: &mut Rng,
) -> Result<DsmOutput<T>> {
    dsm_minibatch_loss_weighted(model, batch, sampling, scale, DsmWeighting::Unweighted, rng)
}

pub fn dsm_minibatch_loss_weighted<T: Scalar>(
    model: &EnergyModel<T>,
    batch: ArrayView2<T>,
    sampling: &LevelSampling,
    scale: &NoiseScale,
    weighting: DsmWeighting,
    rng: &mut Rng,
) -> Result<DsmOutput<T>> {
    if batch.nrows() == 0 {
        return Err(Error::Empty("dsm batch"));
    }
    let levels = sampling.draw(scale, batch.nrows(), rng)?;
    let eps = standard_normal(batch.nrows(), batch.ncols(), rng);
    dsm_loss_weighted(model, batch, &levels, scale, eps.view(), weighting)
}

/// `n x d` matrix of independent standard normal draws.
pub fn standard_normal<T: Scalar>(n: usize, d: usize, rng: &mut Rng) -> Array2<T> {
    let mut out = Array2::zeros((n, d));
    Zip::from(&mut out).for_each(|v| {
        let e: f64 = StandardNormal.sample(rng);
        *v = T::of(e);
    });
    out
}
