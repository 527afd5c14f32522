//! The scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar used for times, values and spectra.
///
/// Implemented for `f32` and `f64`. Literals go through [`Scalar::lit`] so the
/// numerical code reads the same for both precisions.
pub trait Scalar:
    Float + FloatConst + FftNum + Default + Display + Debug + Serialize + DeserializeOwned
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self;

    /// Widens to `f64` (lossless for both implementors).
    fn as_f64(self) -> f64;

    /// Absolute value, spelled out to avoid the `Float`/`Signed` method clash.
    #[inline]
    fn mag(self) -> Self {
        Float::abs(self)
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Relative machine tolerance for interval arithmetic on `T`.
pub fn rel_tol<T: Scalar>() -> T {
    T::epsilon() * T::lit(16.0)
}
