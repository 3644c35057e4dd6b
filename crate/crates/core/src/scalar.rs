//! Floating-point abstraction for the numeric kernels.

use num_traits::{Float as NumFloat, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    NumFloat + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for constants in generic code.
    fn from_f64_lossy(value: f64) -> Self {
        <Self as FromPrimitive>::from_f64(value).expect("f64 constant representable in Scalar")
    }

    fn from_usize_lossy(value: usize) -> Self {
        <Self as FromPrimitive>::from_usize(value).expect("usize representable in Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
