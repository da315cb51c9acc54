use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng as _;

use super::init::xavier_uniform;
use super::Activation;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::Scalar;

/// One fully-connected layer: `activation(W x + b)` with `W` stored
/// `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Scalar> Dense<T> {
    pub fn new(weights: Array2<T>, bias: Array1<T>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.nrows() {
            return Err(Error::dim("dense bias", weights.nrows(), bias.len()));
        }
        Ok(Dense {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Parameter gradients laid out like the network they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<(Array2<T>, Array1<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &DenseNetwork<T>) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.out_dim())))
                .collect(),
        }
    }

    /// Same order as [`DenseNetwork::params`].
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for (w, b) in &mut self.layers {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|v| v.is_finite()))
    }
}

/// Activations recorded during a batched forward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    /// Input to each layer, `batch x in`.
    inputs: Vec<Array2<T>>,
    /// Pre-activation of each layer, `batch x out`.
    pre: Vec<Array2<T>>,
    output: Array2<T>,
}

impl<T: Scalar> Tape<T> {
    pub fn output(&self) -> &Array2<T> {
        &self.output
    }
}

/// Dense feed-forward network with exact first- and second-order
/// reverse-mode derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork<T> {
    layers: Vec<Dense<T>>,
}

impl<T: Scalar> DenseNetwork<T> {
    pub fn new(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network layers"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::dim("layer chain", pair[0].out_dim(), pair[1].in_dim()));
            }
        }
        let finite = layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::NonFinite("network weights".into()));
        }
        Ok(DenseNetwork { layers })
    }

    /// Multilayer perceptron over `dims = [in, h1, ..., out]` with Xavier
    /// uniform weights and zero biases.
    pub fn mlp(dims: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument("an mlp needs at least input and output dims".into()));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument("layer dims must be positive".into()));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                Dense::new(xavier_uniform(dims[i], dims[i + 1], rng), Array1::zeros(dims[i + 1]), act)
            })
            .collect::<Result<Vec<_>>>()?;
        DenseNetwork::new(layers)
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flattened parameters: per layer, row-major weights then bias.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::dim("flat parameters", self.num_params(), flat.len()));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = flat[offset];
                offset += 1;
            }
            for b in l.bias.iter_mut() {
                *b = flat[offset];
                offset += 1;
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let input = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.forward_batch(input)?.row(0).to_vec())
    }

    pub fn forward_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(x)?;
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut z = h.dot(&l.weights.t());
            z += &l.bias;
            let act = l.activation;
            z.mapv_inplace(|v| act.apply(v));
            h = z;
        }
        Ok(h)
    }

    pub fn record(&self, x: ArrayView2<T>) -> Result<Tape<T>> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut z = h.dot(&l.weights.t());
            z += &l.bias;
            let act = l.activation;
            let next = z.mapv(|v| act.apply(v));
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Ok(Tape {
            inputs,
            pre,
            output: h,
        })
    }

    /// Gradient of a scalar output with respect to the input.
    pub fn input_gradient(&self, x: &[T]) -> Result<Vec<T>> {
        let input = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        let (_, grad) = self.input_gradient_batch(input)?;
        Ok(grad.row(0).to_vec())
    }

    /// Scalar outputs and their input gradients for every row of `x`.
    pub fn input_gradient_batch(&self, x: ArrayView2<T>) -> Result<(Array1<T>, Array2<T>)> {
        self.check_scalar()?;
        let tape = self.record(x)?;
        let grad = self.input_gradient_from(&tape);
        Ok((tape.output.column(0).to_owned(), grad))
    }

    pub fn input_gradient_from(&self, tape: &Tape<T>) -> Array2<T> {
        let batch = tape.output.nrows();
        let seed = Array2::from_elem((batch, 1), T::one());
        let (_, input_adj) = self.backward(tape, seed, false);
        input_adj
    }

    /// Parameter gradient of `sum_b adjoint[b] . y[b]`, the usual
    /// vector-Jacobian product.
    pub fn param_gradient_batch(&self, x: ArrayView2<T>, output_adjoint: ArrayView2<T>) -> Result<Gradients<T>> {
        let tape = self.record(x)?;
        self.param_gradient_from(&tape, output_adjoint)
    }

    pub fn param_gradient_from(&self, tape: &Tape<T>, output_adjoint: ArrayView2<T>) -> Result<Gradients<T>> {
        if output_adjoint.dim() != tape.output.dim() {
            return Err(Error::dim("output adjoint", tape.output.len(), output_adjoint.len()));
        }
        let (grads, _) = self.backward(tape, output_adjoint.to_owned(), true);
        Ok(grads.expect("requested"))
    }

    /// Parameter gradient of a loss that depends on each sample's scalar
    /// output `y_b` and its input gradient `g_b = dy_b/dx_b`.
    ///
    /// `output_adjoint[b] = dl/dy_b` and `tangent[b] = dl/dg_b`, both
    /// evaluated at the current parameters. The result is
    /// `d/dtheta sum_b (output_adjoint[b] y_b + tangent[b] . g_b)`, computed
    /// by reverse mode over a forward tangent pass along `tangent`.
    pub fn second_order_gradient_from(
        &self,
        tape: &Tape<T>,
        output_adjoint: ArrayView1<T>,
        tangent: ArrayView2<T>,
    ) -> Result<Gradients<T>> {
        self.check_scalar()?;
        let batch = tape.output.nrows();
        if output_adjoint.len() != batch {
            return Err(Error::dim("output adjoint", batch, output_adjoint.len()));
        }
        if tangent.dim() != tape.inputs[0].dim() {
            return Err(Error::dim("input tangent", tape.inputs[0].len(), tangent.len()));
        }

        let mut h_dot = tangent.to_owned();
        let mut tangent_in = Vec::with_capacity(self.layers.len());
        let mut tangent_pre = Vec::with_capacity(self.layers.len());
        for (l, z) in self.layers.iter().zip(&tape.pre) {
            let z_dot = h_dot.dot(&l.weights.t());
            let act = l.activation;
            let mut next = z_dot.clone();
            Zip::from(&mut next).and(z).for_each(|n, &zv| *n *= act.derivative(zv));
            tangent_in.push(h_dot);
            tangent_pre.push(z_dot);
            h_dot = next;
        }

        let mut h_bar = output_adjoint.to_owned().insert_axis(Axis(1));
        let mut h_dot_bar = Array2::from_elem((batch, 1), T::one());
        let mut grads = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate().rev() {
            let act = l.activation;
            let z = &tape.pre[i];
            let z_dot = &tangent_pre[i];
            let mut z_bar = Array2::zeros(z.raw_dim());
            let mut z_dot_bar = Array2::zeros(z.raw_dim());
            Zip::from(&mut z_bar)
                .and(&mut z_dot_bar)
                .and(z)
                .and(z_dot)
                .and(&h_bar)
                .and(&h_dot_bar)
                .for_each(|zb, zdb, &zv, &zd, &hb, &hdb| {
                    let d1 = act.derivative(zv);
                    *zb = hb * d1 + hdb * act.second_derivative(zv) * zd;
                    *zdb = hdb * d1;
                });
            let mut g_w = z_bar.t().dot(&tape.inputs[i]);
            g_w += &z_dot_bar.t().dot(&tangent_in[i]);
            let g_b = z_bar.sum_axis(Axis(0));
            grads.push((g_w, g_b));
            if i > 0 {
                h_bar = z_bar.dot(&l.weights);
                h_dot_bar = z_dot_bar.dot(&l.weights);
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Exact parameter gradient of `loss(dy/dx)` for a single input.
    ///
    /// `loss` receives the input gradient and returns its value together
    /// with its derivative with respect to that gradient.
    pub fn param_grad_of_input_grad_loss<F>(&self, x: &[T], loss: F) -> Result<(T, Gradients<T>)>
    where
        F: FnOnce(&[T]) -> (T, Vec<T>),
    {
        let input = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        self.param_grad_of_input_grad_loss_batch(input, |g| {
            let (value, d) = loss(g.row(0).as_slice().expect("contiguous"));
            let n = d.len();
            (value, Array2::from_shape_vec((1, n), d).expect("row"))
        })
    }

    /// Batched form of [`Self::param_grad_of_input_grad_loss`]: `loss`
    /// sees the `batch x D` input gradients and returns the total loss and
    /// its derivative with respect to each entry.
    pub fn param_grad_of_input_grad_loss_batch<F>(&self, x: ArrayView2<T>, loss: F) -> Result<(T, Gradients<T>)>
    where
        F: FnOnce(ArrayView2<T>) -> (T, Array2<T>),
    {
        self.check_scalar()?;
        let tape = self.record(x)?;
        let grad = self.input_gradient_from(&tape);
        let (value, tangent) = loss(grad.view());
        if tangent.dim() != grad.dim() {
            return Err(Error::dim("loss derivative", grad.len(), tangent.len()));
        }
        let zeros = Array1::zeros(grad.nrows());
        let grads = self.second_order_gradient_from(&tape, zeros.view(), tangent.view())?;
        Ok((value, grads))
    }

    /// Returns parameter gradients (when requested) and the input adjoint.
    fn backward(&self, tape: &Tape<T>, seed: Array2<T>, want_params: bool) -> (Option<Gradients<T>>, Array2<T>) {
        let mut h_bar = seed;
        let mut grads = Vec::new();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let act = l.activation;
            let mut z_bar = h_bar;
            Zip::from(&mut z_bar)
                .and(&tape.pre[i])
                .for_each(|zb, &zv| *zb *= act.derivative(zv));
            if want_params {
                grads.push((z_bar.t().dot(&tape.inputs[i]), z_bar.sum_axis(Axis(0))));
            }
            h_bar = z_bar.dot(&l.weights);
        }
        let grads = want_params.then(|| {
            grads.reverse();
            Gradients { layers: grads }
        });
        (grads, h_bar)
    }

    fn check_input(&self, x: ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::dim("network input", self.input_dim(), x.ncols()));
        }
        Ok(())
    }

    fn check_scalar(&self) -> Result<()> {
        if self.output_dim() != 1 {
            return Err(Error::dim("scalar network output", 1, self.output_dim()));
        }
        Ok(())
    }

    /// Uniform random perturbation helper for tests and probes.
    pub fn jitter(&mut self, scale: f64, rng: &mut Rng) {
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v += T::of(rng.random_range(-scale..=scale));
            }
        }
    }
}
