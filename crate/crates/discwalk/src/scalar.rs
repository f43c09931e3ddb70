//! Scalar abstraction: all numeric code in this crate is generic over the
//! floating point type. `f64` is the default throughout the CLI; `f32` is
//! available for memory-bound experiments.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating point scalar usable by the instance, solver and walk code.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Display
    + Debug
    + Sum
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Cast from `f64`. Out-of-range values saturate to infinity, which is
    /// acceptable for the constants this crate feeds through here.
    #[inline]
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Base-2 logarithm of `n` as a scalar, with `log2(n) = 0` for `n <= 1`.
pub fn log2_usize<S: Scalar>(n: usize) -> S {
    if n <= 1 {
        S::zero()
    } else {
        S::of((n as f64).log2())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn casts_round_trip() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(f32::of(1.5), 1.5f32);
        assert_eq!(2.5f64.as_f64(), 2.5);
    }

    #[test]
    fn log2_edge_cases() {
        assert_eq!(log2_usize::<f64>(0), 0.0);
        assert_eq!(log2_usize::<f64>(1), 0.0);
        assert_eq!(log2_usize::<f64>(8), 3.0);
    }
}
