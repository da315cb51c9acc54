use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};

use crate::diffcore::{Activation, DenseNetwork};
use crate::energy::Standardization;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fixed log standard deviation of every action component.
pub const LOG_STD: f64 = -2.9;

/// Factor on the Xavier weights of the policy's output layer.
pub const POLICY_HEAD_GAIN: f64 = 0.01;

/// Diagonal Gaussian policy with a learned mean and a fixed covariance.
/// States pass through a fixed affine map before the network.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: DenseNetwork<f64>,
    log_std: Vec<f64>,
    obs: Standardization<f64>,
}

fn check_obs(obs: &Standardization<f64>, dim: usize) -> Result<()> {
    if obs.dim() != dim {
        return Err(Error::dim("observation map", dim, obs.dim()));
    }
    Ok(())
}

impl GaussianPolicy {
    /// ReLU hidden layers and a tanh mean head, so means live in the
    /// normalized action box `[-1, 1]`. The head starts near zero.
    pub fn new(state_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let dims: Vec<usize> = std::iter::once(state_dim).chain(hidden.iter().copied()).chain([action_dim]).collect();
        let mut net = DenseNetwork::mlp(&dims, Activation::Relu, Activation::Tanh, rng)?;
        let mut params = net.params();
        let n = params.len();
        let head = dims[dims.len() - 2] * action_dim + action_dim;
        params[n - head..].iter_mut().for_each(|p| *p *= POLICY_HEAD_GAIN);
        net.set_params(&params)?;
        GaussianPolicy::from_net(net, vec![LOG_STD; action_dim])
    }

    pub fn from_net(net: DenseNetwork<f64>, log_std: Vec<f64>) -> Result<Self> {
        if log_std.len() != net.output_dim() {
            return Err(Error::dim("policy log-std", net.output_dim(), log_std.len()));
        }
        if log_std.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy log-std".into()));
        }
        let obs = Standardization::identity(net.input_dim());
        Ok(GaussianPolicy { net, log_std, obs })
    }

    pub fn with_obs(mut self, obs: Standardization<f64>) -> Result<Self> {
        check_obs(&obs, self.net.input_dim())?;
        self.obs = obs;
        Ok(self)
    }

    pub fn obs(&self) -> &Standardization<f64> {
        &self.obs
    }

    /// Network inputs for raw states.
    pub fn inputs(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_obs(&self.obs, states.ncols())?;
        Ok(self.obs.apply(states))
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn mean(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.net.forward_batch(self.inputs(states)?.view())
    }

    /// Exact diagonal Gaussian log-density of each action row.
    pub fn log_prob(&self, mean: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array1<f64>> {
        if mean.dim() != actions.dim() || mean.ncols() != self.action_dim() {
            return Err(Error::dim("policy actions", mean.len(), actions.len()));
        }
        let norm: f64 = self.log_std.iter().map(|ls| -0.5 * (2.0 * PI).ln() - ls).sum();
        Ok(Array1::from_iter(mean.rows().into_iter().zip(actions.rows()).map(|(m, a)| {
            let quad: f64 = m
                .iter()
                .zip(a)
                .zip(&self.log_std)
                .map(|((m, a), ls)| ((a - m) / ls.exp()).powi(2))
                .sum();
            norm - 0.5 * quad
        })))
    }

    /// Draws one action per state row, using one generator per row.
    pub fn sample_batch(&self, states: ArrayView2<f64>, rngs: &mut [Rng]) -> Result<(Array2<f64>, Array1<f64>)> {
        if rngs.len() != states.nrows() {
            return Err(Error::dim("policy rngs", states.nrows(), rngs.len()));
        }
        let mean = self.mean(states)?;
        let mut actions = mean.clone();
        for (mut row, rng) in actions.rows_mut().into_iter().zip(rngs.iter_mut()) {
            for (a, ls) in row.iter_mut().zip(&self.log_std) {
                let e: f64 = StandardNormal.sample(rng);
                *a += ls.exp() * e;
            }
        }
        let logp = self.log_prob(mean.view(), actions.view())?;
        Ok((actions, logp))
    }

    pub fn sample_action(&self, state: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let s = ArrayView2::from_shape((1, state.len()), state).expect("row view");
        let (a, lp) = self.sample_batch(s, std::slice::from_mut(rng))?;
        Ok((a.row(0).to_vec(), lp[0]))
    }

    /// Evaluation action: the mean.
    pub fn deterministic_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        let s = ArrayView2::from_shape((1, state.len()), state).expect("row view");
        Ok(self.mean(s)?.row(0).to_vec())
    }
}

/// Scalar state-value network.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub net: DenseNetwork<f64>,
    obs: Standardization<f64>,
}

impl ValueFunction {
    pub fn new(state_dim: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let dims: Vec<usize> = std::iter::once(state_dim).chain(hidden.iter().copied()).chain([1]).collect();
        ValueFunction::from_net(DenseNetwork::mlp(&dims, Activation::Relu, Activation::Identity, rng)?)
    }

    pub fn from_net(net: DenseNetwork<f64>) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::dim("value output", 1, net.output_dim()));
        }
        let obs = Standardization::identity(net.input_dim());
        Ok(ValueFunction { net, obs })
    }

    pub fn with_obs(mut self, obs: Standardization<f64>) -> Result<Self> {
        check_obs(&obs, self.net.input_dim())?;
        self.obs = obs;
        Ok(self)
    }

    pub fn obs(&self) -> &Standardization<f64> {
        &self.obs
    }

    pub fn inputs(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_obs(&self.obs, states.ncols())?;
        Ok(self.obs.apply(states))
    }

    pub fn values(&self, states: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.net.forward_batch(self.inputs(states)?.view())?.column(0).to_owned())
    }
}
