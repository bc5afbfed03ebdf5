//! Scalar abstraction shared by every geometric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point type the solver can run on.
///
/// Blanket-implemented for anything nalgebra treats as a real field that can
/// also round-trip through `f64`, which in practice means `f32` and `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

/// Converts an `f64` literal into the working scalar.
#[inline(always)]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Widens a working scalar to `f64` (for reporting and serialization).
#[inline(always)]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline(always)]
pub fn infinity<T: Real>() -> T {
    lit(f64::INFINITY)
}
