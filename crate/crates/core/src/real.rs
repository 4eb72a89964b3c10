//! Scalar abstraction for the numerical kernels.
//!
//! Everything that does floating-point work is generic over [`Real`], a
//! small alias trait over the `num-traits` hierarchy implemented for `f32`
//! and `f64`. Concrete `f64` aliases for the main types live at the crate
//! root; `f32` stays available for memory-bound experiments.

use std::fmt;
use std::iter::{Product, Sum};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar usable in every kernel of this crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum<Self>
    + Product<Self>
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts a literal. Panics only for values outside the type's range,
    /// which cannot happen for the constants used in this crate.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal converts to Real")
    }

    /// Converts a count; exact for counts below the mantissa width.
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize converts to Real")
    }

    /// Lossy view as f64, for reporting and CSV output.
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
