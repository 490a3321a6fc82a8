//! Floating-point scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real scalar type the solver is generic over: `f32` or `f64`.
///
/// Tolerances that depend on the working precision live here as associated
/// constants so that generic code does not hard-code double-precision values.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Default
    + Display
    + Debug
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Largest imaginary residue (relative to the coefficient mass) tolerated
    /// when returning from spectral to physical space.
    const HERMITIAN_TOL: f64;
    /// Largest |mean| / rms accepted by the inverse multipliers.
    const ZERO_MODE_TOL: f64;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable in every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const HERMITIAN_TOL: f64 = 1e-10;
    const ZERO_MODE_TOL: f64 = 1e-8;
}

impl Scalar for f32 {
    const HERMITIAN_TOL: f64 = 1e-4;
    const ZERO_MODE_TOL: f64 = 1e-4;
}
