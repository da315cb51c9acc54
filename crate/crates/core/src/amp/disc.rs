use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::diffcore::{sigmoid, Activation, DenseNetwork, Gradients};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Floor on `1 - D` inside the reward logarithm.
pub const REWARD_FLOOR: f64 = 1e-4;

/// Raw-logit discriminator; probabilities are `sigmoid(logit)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub net: DenseNetwork<f64>,
    pub coeffs: DiscCoeffs,
}

/// Weights of the three objective terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscCoeffs {
    /// Multiplies the cross-entropy term only.
    pub loss: f64,
    pub grad_penalty: f64,
    pub output_reg: f64,
}

impl Default for DiscCoeffs {
    fn default() -> Self {
        DiscCoeffs { loss: 5.0, grad_penalty: 5.0, output_reg: 0.05 }
    }
}

impl DiscCoeffs {
    /// Plain cross-entropy.
    pub fn bce_only() -> Self {
        DiscCoeffs { loss: 1.0, grad_penalty: 0.0, output_reg: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss > 0.0 && self.grad_penalty >= 0.0 && self.output_reg >= 0.0) {
            return Err(Error::InvalidArgument(format!("bad discriminator coefficients {self:?}")));
        }
        Ok(())
    }
}

impl Discriminator {
    /// ReLU MLP whose output layer starts at zero, so every initial logit
    /// is 0 and `D = 1/2` everywhere.
    pub fn new(input_dim: usize, hidden: &[usize], coeffs: DiscCoeffs, rng: &mut Rng) -> Result<Self> {
        let dims: Vec<usize> = std::iter::once(input_dim).chain(hidden.iter().copied()).chain([1]).collect();
        let mut net = DenseNetwork::mlp(&dims, Activation::Relu, Activation::Identity, rng)?;
        let mut params = net.params();
        let tail = dims[dims.len() - 2] + 1;
        let n = params.len();
        params[n - tail..].iter_mut().for_each(|p| *p = 0.0);
        net.set_params(&params)?;
        Discriminator::from_net(net, coeffs)
    }

    pub fn from_net(net: DenseNetwork<f64>, coeffs: DiscCoeffs) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::dim("discriminator output", 1, net.output_dim()));
        }
        coeffs.validate()?;
        Ok(Discriminator { net, coeffs })
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.net.forward_batch(x)?.column(0).to_owned())
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.logits(x)?.mapv(sigmoid))
    }

    pub fn reward(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.logits(x)?.mapv(disc_reward))
    }

    /// Input gradient norm of the probability output, per row.
    pub fn prob_grad_norms(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let (logits, g) = self.net.input_gradient_batch(x)?;
        let norms = g.map_axis(Axis(1), |r| r.dot(&r).sqrt());
        Ok(Array1::from_iter(logits.iter().zip(&norms).map(|(&l, &n)| {
            let p = sigmoid(l);
            p * (1.0 - p) * n
        })))
    }
}

/// `-log(max(1 - sigmoid(logit), 1e-4))`.
pub fn disc_reward(logit: f64) -> f64 {
    // 1 - sigmoid(l) = sigmoid(-l)
    -sigmoid(-logit).max(REWARD_FLOOR).ln()
}

/// `log(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Terms of the discriminator objective on one batch pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscLossParts {
    pub bce: f64,
    pub grad_penalty: f64,
    pub output_reg: f64,
}

impl DiscLossParts {
    /// Weighted objective; `grad_penalty` and `output_reg` already carry
    /// their coefficients.
    pub fn total(&self, coeffs: &DiscCoeffs) -> f64 {
        coeffs.loss * self.bce + self.grad_penalty + self.output_reg
    }
}

/// Cross-entropy (expert labelled 1, policy 0) plus the gradient penalty
/// on expert inputs and the logit-magnitude penalty on both batches, with
/// exact parameter gradients of the weighted total.
pub fn disc_loss(disc: &Discriminator, expert: ArrayView2<f64>, policy: ArrayView2<f64>) -> Result<(DiscLossParts, Gradients<f64>)> {
    let (nd, ng) = (expert.nrows(), policy.nrows());
    if nd == 0 || ng == 0 {
        return Err(Error::Empty("discriminator batch"));
    }
    let net = &disc.net;
    let total = (nd + ng) as f64;
    let tape_d = net.record(expert)?;
    let grad_d = net.input_gradient_from(&tape_d);
    let logit_d = tape_d.output().column(0).to_owned();
    let tape_g = net.record(policy)?;
    let logit_g = tape_g.output().column(0).to_owned();

    let c = disc.coeffs;
    let mut parts = DiscLossParts { bce: 0.0, grad_penalty: 0.0, output_reg: 0.0 };
    let mut adj_d = Array1::zeros(nd);
    for (b, &l) in logit_d.iter().enumerate() {
        parts.bce += softplus(-l) / nd as f64;
        parts.output_reg += c.output_reg * l * l / total;
        adj_d[b] = -c.loss * sigmoid(-l) / nd as f64 + c.output_reg * 2.0 * l / total;
    }
    let mut adj_g = Array2::zeros((ng, 1));
    for (b, &l) in logit_g.iter().enumerate() {
        parts.bce += softplus(l) / ng as f64;
        parts.output_reg += c.output_reg * l * l / total;
        adj_g[[b, 0]] = c.loss * sigmoid(l) / ng as f64 + c.output_reg * 2.0 * l / total;
    }
    parts.grad_penalty = c.grad_penalty * grad_d.iter().map(|g| g * g).sum::<f64>() / nd as f64;
    let tangent = grad_d.mapv(|g| c.grad_penalty * 2.0 * g / nd as f64);
    let mut grads = net.second_order_gradient_from(&tape_d, adj_d.view(), tangent.view())?;
    grads.add_assign(&net.param_gradient_from(&tape_g, adj_g.view())?);
    if !parts.total(&c).is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite("discriminator loss".into()));
    }
    Ok((parts, grads))
}

/// Fraction of rows classified correctly; `D >= 1/2` predicts expert.
pub fn accuracy(disc: &Discriminator, expert: ArrayView2<f64>, policy: ArrayView2<f64>) -> Result<f64> {
    let hits = disc.logits(expert)?.iter().filter(|&&l| l >= 0.0).count() + disc.logits(policy)?.iter().filter(|&&l| l < 0.0).count();
    Ok(hits as f64 / (expert.nrows() + policy.nrows()) as f64)
}
