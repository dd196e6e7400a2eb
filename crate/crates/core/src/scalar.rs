//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the estimator can run on: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Default gradient tolerance for the optimizer at this precision.
    fn default_tolerance() -> Self;

    /// Smallest likelihood term admitted before taking a logarithm.
    fn probability_floor() -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn default_tolerance() -> Self {
        1e-8
    }

    fn probability_floor() -> Self {
        1e-300
    }
}

impl Scalar for f32 {
    fn default_tolerance() -> Self {
        1e-2
    }

    fn probability_floor() -> Self {
        f32::MIN_POSITIVE
    }
}

/// Numerically stable logistic function `1 / (1 + exp(-x))`.
#[inline]
pub fn logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + exp(x))` without overflow.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `logistic(x) - logistic(y)` for `x >= y`, evaluated in whichever tail
/// keeps the subtraction well conditioned.
#[inline]
pub fn logistic_diff<T: Scalar>(x: T, y: T) -> T {
    if y > T::zero() {
        logistic(-y) - logistic(-x)
    } else {
        logistic(x) - logistic(y)
    }
}
