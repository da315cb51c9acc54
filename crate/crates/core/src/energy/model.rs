use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::ExpertDataset;
use crate::diffcore::{Activation, Checkpoint, DenseNetwork, EmaState};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::Scalar;

/// Auto-encoder shaped layer widths for the unconditional energy network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnergyArch {
    pub encoder: Vec<usize>,
    pub latent: usize,
    pub decoder: Vec<usize>,
}

impl EnergyArch {
    /// Large configuration: encoder (512, 1024), latent 2048,
    /// decoder (1024, 512, 128).
    pub fn large() -> Self {
        EnergyArch {
            encoder: vec![512, 1024],
            latent: 2048,
            decoder: vec![1024, 512, 128],
        }
    }

    /// Layer dims from `input` through the scalar output.
    pub fn dims(&self, input: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(&self.encoder);
        dims.push(self.latent);
        dims.extend(&self.decoder);
        dims.push(1);
        dims
    }
}

impl Default for EnergyArch {
    /// Desk-scale widths: encoder (64, 128), latent 256, decoder (128, 64, 32).
    fn default() -> Self {
        EnergyArch {
            encoder: vec![64, 128],
            latent: 256,
            decoder: vec![128, 64, 32],
        }
    }
}

/// Per-feature affine standardization `(x - mean) / std`, frozen after fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization<T> {
    mean: Array1<T>,
    std: Array1<T>,
}

/// Features whose spread falls below this are left unscaled.
pub const MIN_STD: f64 = 1e-6;

impl<T: Scalar> Standardization<T> {
    pub fn new(mean: Array1<T>, std: Array1<T>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::dim("standardization", mean.len(), std.len()));
        }
        if std.iter().any(|s| !(*s > T::zero() && s.is_finite())) {
            return Err(Error::InvalidArgument("standardization std must be positive".into()));
        }
        Ok(Standardization { mean, std })
    }

    pub fn identity(dim: usize) -> Self {
        Standardization {
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
        }
    }

    pub fn fit(data: &ExpertDataset<T>) -> Self {
        let mean = data.mean();
        let std = data
            .features()
            .std_axis(Axis(0), T::zero())
            .mapv(|s| if s.f64() < MIN_STD { T::one() } else { s });
        Standardization { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Array1<T> {
        &self.mean
    }

    pub fn std(&self) -> &Array1<T> {
        &self.std
    }

    pub fn apply(&self, x: ArrayView2<T>) -> Array2<T> {
        (&x - &self.mean) / &self.std
    }
}

/// Which parameter copy an evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weights {
    Live,
    /// Exponential moving average of the live weights; used for inference.
    Ema,
}

/// Unconditional energy network `e(x)` with the noise-conditioned form
/// `e(x, sigma) = e(x) / sigma`. Higher energy means closer to the data.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel<T> {
    net: DenseNetwork<T>,
    ema: EmaState<T>,
    ema_net: DenseNetwork<T>,
    standardization: Standardization<T>,
}

const NET: [u8; 4] = *b"NET ";
const EMA: [u8; 4] = *b"EMAS";
const MEAN: [u8; 4] = *b"MEAN";
const STD: [u8; 4] = *b"STD ";

impl<T: Scalar> EnergyModel<T> {
    pub fn new(arch: &EnergyArch, standardization: Standardization<T>, ema_decay: f64, rng: &mut Rng) -> Result<Self> {
        let net = DenseNetwork::mlp(&arch.dims(standardization.dim()), Activation::Elu, Activation::Identity, rng)?;
        EnergyModel::from_parts(net, standardization, ema_decay)
    }

    /// Wraps an existing scalar-output network; the EMA starts at its weights.
    pub fn from_parts(net: DenseNetwork<T>, standardization: Standardization<T>, ema_decay: f64) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::dim("energy output", 1, net.output_dim()));
        }
        if net.input_dim() != standardization.dim() {
            return Err(Error::dim("energy input", standardization.dim(), net.input_dim()));
        }
        let ema = EmaState::new(net.params(), ema_decay)?;
        Ok(EnergyModel {
            ema_net: net.clone(),
            net,
            ema,
            standardization,
        })
    }

    pub fn dim(&self) -> usize {
        self.standardization.dim()
    }

    pub fn network(&self, weights: Weights) -> &DenseNetwork<T> {
        match weights {
            Weights::Live => &self.net,
            Weights::Ema => &self.ema_net,
        }
    }

    pub fn ema(&self) -> &EmaState<T> {
        &self.ema
    }

    pub fn standardization(&self) -> &Standardization<T> {
        &self.standardization
    }

    /// Replaces the live parameters and folds them into the EMA shadow.
    pub fn update_live(&mut self, params: &[T]) -> Result<()> {
        self.net.set_params(params)?;
        self.ema.update(params)?;
        self.ema_net.set_params(&self.ema.shadow)
    }

    pub fn unconditional_batch(&self, x: ArrayView2<T>, weights: Weights) -> Result<Array1<T>> {
        self.check(x)?;
        let out = self.network(weights).forward_batch(self.standardization.apply(x).view())?;
        Ok(out.column(0).to_owned())
    }

    pub fn conditional_energy(&self, x: &[T], sigma: f64, weights: Weights) -> Result<T> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.conditional_energy_batch(view, sigma, weights)?[0])
    }

    pub fn conditional_energy_batch(&self, x: ArrayView2<T>, sigma: f64, weights: Weights) -> Result<Array1<T>> {
        check_sigma(sigma)?;
        let s = T::of(sigma);
        Ok(self.unconditional_batch(x, weights)?.mapv(|e| e / s))
    }

    /// `d e(x, sigma) / dx`, including the standardization chain rule.
    pub fn score(&self, x: &[T], sigma: f64, weights: Weights) -> Result<Vec<T>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.score_batch(view, sigma, weights)?.row(0).to_vec())
    }

    pub fn score_batch(&self, x: ArrayView2<T>, sigma: f64, weights: Weights) -> Result<Array2<T>> {
        check_sigma(sigma)?;
        self.check(x)?;
        let z = self.standardization.apply(x);
        let (_, g) = self.network(weights).input_gradient_batch(z.view())?;
        let scale = self.standardization.std.mapv(|s| s * T::of(sigma));
        Ok(g / &scale)
    }

    fn check(&self, x: ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::dim("energy input", self.dim(), x.ncols()));
        }
        Ok(())
    }

    pub fn write_sections(&self, ck: &mut Checkpoint) {
        ck.put_network(NET, &self.net);
        ck.put_ema(EMA, &self.ema);
        ck.put_vector(MEAN, self.standardization.mean.as_slice().expect("contiguous"));
        ck.put_vector(STD, self.standardization.std.as_slice().expect("contiguous"));
    }

    pub fn read_sections(ck: &Checkpoint) -> Result<Self> {
        let net: DenseNetwork<T> = ck.network(NET)?;
        let ema: EmaState<T> = ck.ema(EMA)?;
        let standardization = Standardization::new(Array1::from(ck.vector(MEAN)?), Array1::from(ck.vector(STD)?))?;
        let mut model = EnergyModel::from_parts(net, standardization, ema.decay)?;
        model.ema_net.set_params(&ema.shadow)?;
        model.ema = ema;
        Ok(model)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// Mean conditional energy over points at distance `radius` from each data
/// sample along a random unit direction.
pub fn ring_energy_profile<T: Scalar>(
    model: &EnergyModel<T>,
    data: ArrayView2<T>,
    radii: &[f64],
    sigma: f64,
    weights: Weights,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let dirs = random_unit_rows(data.nrows(), data.ncols(), rng);
    radii
        .iter()
        .map(|&r| {
            let pts = &data + &dirs.mapv(|v| T::of(v * r));
            let e = model.conditional_energy_batch(pts.view(), sigma, weights)?;
            Ok(e.iter().map(|v| v.f64()).sum::<f64>() / e.len() as f64)
        })
        .collect()
}

/// `n` rows drawn uniformly from the unit sphere in `d` dimensions.
pub fn random_unit_rows(n: usize, d: usize, rng: &mut Rng) -> Array2<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut m: Array2<f64> = Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(rng));
    for mut row in m.rows_mut() {
        let norm = row.dot(&row).sqrt().max(1e-300);
        row.mapv_inplace(|v| v / norm);
    }
    m
}
