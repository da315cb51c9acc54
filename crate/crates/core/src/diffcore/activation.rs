use crate::Scalar;

/// Pointwise nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    /// Exponential linear unit with `alpha = 1`.
    Elu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(T::zero()),
            Activation::Elu => {
                if z > T::zero() {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// First derivative at pre-activation `z`.
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Elu => {
                if z > T::zero() {
                    T::one()
                } else {
                    z.exp()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (T::one() - s)
            }
        }
    }

    /// Second derivative at pre-activation `z`.
    pub fn second_derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity | Activation::Relu => T::zero(),
            Activation::Elu => {
                if z > T::zero() {
                    T::zero()
                } else {
                    z.exp()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                let two = T::one() + T::one();
                -two * t * (T::one() - t * t)
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                let two = T::one() + T::one();
                s * (T::one() - s) * (T::one() - two * s)
            }
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Elu => 2,
            Activation::Tanh => 3,
            Activation::Sigmoid => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Elu,
            3 => Activation::Tanh,
            4 => Activation::Sigmoid,
            _ => return None,
        })
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}
