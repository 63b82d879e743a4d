//! Floating point scalar abstraction.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by the tensor tape and the model: `f32` or `f64`.
///
/// Checkpoints always store values as little-endian `f64`, so both widths
/// share one file format.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, rounding for narrower types.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("every f64 converts to a Float type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("every Float converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
