use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GeluMode {
    /// `x·Φ(x)` with the erf-based normal CDF.
    #[default]
    Exact,
    /// The tanh approximation, kept for speed comparisons.
    Tanh,
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

#[inline]
pub fn gelu_scalar<T: Scalar>(x: T, mode: GeluMode) -> T {
    let half = T::from_f64(0.5);
    match mode {
        GeluMode::Exact => half * x * (T::one() + (x * T::from_f64(FRAC_1_SQRT_2)).erf()),
        GeluMode::Tanh => {
            let inner = T::from_f64(SQRT_2_OVER_PI) * (x + T::from_f64(0.044715) * x * x * x);
            half * x * (T::one() + inner.tanh())
        }
    }
}

/// d/dx of [`gelu_scalar`].
#[inline]
pub fn gelu_grad(x: f64, mode: GeluMode) -> f64 {
    match mode {
        GeluMode::Exact => {
            let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
            let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
            cdf + x * pdf
        }
        GeluMode::Tanh => {
            let u = SQRT_2_OVER_PI * (x + 0.044715 * x * x * x);
            let t = u.tanh();
            let du = SQRT_2_OVER_PI * (1.0 + 3.0 * 0.044715 * x * x);
            0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
        }
    }
}

pub fn gelu<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| gelu_scalar(v, GeluMode::Exact)).collect()
}

pub fn gelu_in_place<T: Scalar>(x: &mut [T], mode: GeluMode) {
    x.iter_mut().for_each(|v| *v = gelu_scalar(*v, mode));
}
