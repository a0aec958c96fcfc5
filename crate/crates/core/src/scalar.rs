//! Floating point abstraction shared by every numeric kernel in the crate.
//!
//! All math is written against [`Scalar`]; `f64` is the working precision for
//! training and gradient checking, `f32` is supported for inference and
//! feature extraction.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Lossless widening used by the on-disk formats (always f64).
    fn to_f64_lossless(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub(crate) fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("usize representable in scalar type")
}
