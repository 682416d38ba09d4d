//! Scalar abstraction for the numeric core.
//!
//! Everything that iterates, scores, or averages is generic over [`Real`]
//! so the same code runs on `f32` and `f64`. The blanket impl covers any
//! IEEE float exposing the `num_traits` surface we need.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the solver: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

/// Converts an `f64` constant into the working scalar type.
///
/// Panics only if the scalar cannot represent any `f64` at all, which no
/// IEEE float type triggers; rounding to the nearer representable value
/// is expected and fine for the constants this is used with.
#[inline]
pub fn real<S: Real>(value: f64) -> S {
    S::from_f64(value).expect("f64 constant must convert into the scalar type")
}

/// One half in the working scalar type.
#[inline]
pub fn half<S: Real>() -> S {
    real(0.5)
}

/// Two in the working scalar type.
#[inline]
pub fn two<S: Real>() -> S {
    real(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_convert_exactly() {
        assert_eq!(half::<f64>(), 0.5);
        assert_eq!(half::<f32>(), 0.5f32);
        assert_eq!(two::<f64>(), 2.0);
        assert_eq!(real::<f64>(-1.0), -1.0);
    }
}
