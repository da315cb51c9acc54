use crate::error::{Error, Result};
use crate::Scalar;

/// Hyperparameters for [`AdamState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step: u64,
    pub config: AdamConfig,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState {
            first_moment: vec![T::zero(); len],
            second_moment: vec![T::zero(); len],
            step: 0,
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// Applies one update in place. Non-finite gradients are rejected
    /// before any state is touched.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != self.len() {
            return Err(Error::dim("adam params", self.len(), params.len()));
        }
        if grads.len() != self.len() {
            return Err(Error::dim("adam grads", self.len(), grads.len()));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("adam gradient".into()));
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let t = self.step as i32;
        let bias1 = T::one() - T::of(c.beta1.powi(t));
        let bias2 = T::one() - T::of(c.beta2.powi(t));
        let (lr, eps) = (T::of(c.lr), T::of(c.eps));
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut st = AdamState::<f64>::new(1, cfg(0.1));
        let mut p = [0.0];
        st.step(&mut p, &[1.0]).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        assert!((p[0] + 0.1).abs() < 1e-8);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn moments_follow_recursion() {
        let mut st = AdamState::<f64>::new(1, cfg(0.1));
        let mut p = [0.0];
        st.step(&mut p, &[2.0]).unwrap();
        st.step(&mut p, &[2.0]).unwrap();
        assert!((st.first_moment[0] - 0.1 * 1.9 * 2.0).abs() < 1e-15);
        assert!((st.second_moment[0] - 0.001 * 1.999 * 4.0).abs() < 1e-15);
        assert_eq!(st.step, 2);
    }

    #[test]
    fn zero_gradient_from_fresh_state_keeps_params() {
        let mut st = AdamState::<f64>::new(3, cfg(0.5));
        let mut p = [1.0, -2.0, 3.0];
        for _ in 0..100 {
            st.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn nan_gradient_is_rejected_without_partial_update() {
        let mut st = AdamState::<f64>::new(2, cfg(0.1));
        let mut p = [1.0, 1.0];
        let before = st.clone();
        assert!(st.step(&mut p, &[1.0, f64::NAN]).is_err());
        assert_eq!(p, [1.0, 1.0]);
        assert_eq!(st, before);
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut st = AdamState::<f64>::new(2, cfg(0.1));
        assert!(st.step(&mut [0.0; 3], &[0.0; 3]).is_err());
        assert!(st.step(&mut [0.0; 2], &[0.0; 1]).is_err());
    }
}
