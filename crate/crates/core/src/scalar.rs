//! Floating-point abstraction shared by the norm, statistics and renormalized-distance code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar the numeric routines are generic over: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("representable literal")
    }

    fn from_count(n: usize) -> Self {
        <Self as num_traits::FromPrimitive>::from_usize(n).expect("representable count")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Comparison tolerance appropriate for the type.
    fn tolerance() -> Self;
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-4
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }
}
