use ndarray::Array2;
use rand::Rng as _;

use crate::rng::Rng;
use crate::Scalar;

/// Half-width of the Xavier (Glorot) uniform interval.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `fan_out x fan_in` matrix with entries i.i.d. uniform on `[-b, b]`,
/// `b = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<T: Scalar>(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Array2<T> {
    assert!(fan_in >= 1 && fan_out >= 1, "fans must be positive");
    let b = xavier_bound(fan_in, fan_out);
    Array2::from_shape_simple_fn((fan_out, fan_in), || T::of(rng.random_range(-b..=b)))
}
