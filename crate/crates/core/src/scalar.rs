//! Scalar abstraction for the numeric core.
//!
//! All tensor math, message passing, losses, and geometry routines are
//! generic over [`Scalar`] so the same code runs at f32 or f64. The crate
//! root pins concrete aliases at f64, which is what the training stack,
//! file formats, and tolerance-sensitive checks use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar usable throughout the numeric core.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Sum + Debug + Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an f64 constant into the scalar type.
///
/// Exact for `T = f64`; rounds to nearest for `f32`.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("f64 constant representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lit_is_exact_for_f64() {
        let x: f64 = lit(0.123456789);
        assert_eq!(x, 0.123456789);
    }

    #[test]
    fn lit_narrows_for_f32() {
        let x: f32 = lit(0.5);
        assert_eq!(x, 0.5f32);
    }
}
