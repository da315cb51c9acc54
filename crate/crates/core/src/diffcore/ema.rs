use crate::error::{Error, Result};
use crate::Scalar;

/// Exponential moving average of a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState<T> {
    pub shadow: Vec<T>,
    pub decay: f64,
}

impl<T: Scalar> EmaState<T> {
    pub fn new(initial: Vec<T>, decay: f64) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::InvalidArgument(format!("ema decay {decay} outside (0,1)")));
        }
        Ok(EmaState { shadow: initial, decay })
    }

    /// `shadow <- decay * shadow + (1 - decay) * live`.
    pub fn update(&mut self, live: &[T]) -> Result<()> {
        if live.len() != self.shadow.len() {
            return Err(Error::dim("ema live params", self.shadow.len(), live.len()));
        }
        let d = T::of(self.decay);
        let one_minus = T::of(1.0 - self.decay);
        for (s, &l) in self.shadow.iter_mut().zip(live) {
            *s = d * *s + one_minus * l;
        }
        Ok(())
    }
}
