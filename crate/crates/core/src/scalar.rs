//! Scalar abstraction shared by the numeric modules.
//!
//! Field rendering, preprocessing, dimensionality reduction and clustering are
//! written once against [`Real`] and instantiated for `f32` (the dataset and
//! training precision) and `f64` (reference checks and gradient verification).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Converts a slice between scalar types.
pub fn cast_slice<A: Real, B: Real>(src: &[A]) -> Vec<B> {
    src.iter().map(|&v| B::lit(v.to_f64_lossy())).collect()
}
