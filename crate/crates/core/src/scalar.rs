//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type the library is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal out of range for scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("integer out of range for scalar type")
    }

    /// Relative tolerance used for residual refinement and self-checks.
    /// Never tighter than `1e-12`, loosened for short mantissas.
    fn refine_tol() -> Self {
        let floor = Self::lit(1e-12);
        let eps_based = Self::epsilon() * Self::lit(64.0);
        if eps_based > floor {
            eps_based
        } else {
            floor
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Compensated (Neumaier) summation.
pub fn compensated_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0e16_f64, 1.0, -1.0e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn refine_tol_floors_at_1e12() {
        assert_eq!(f64::refine_tol(), 1e-12);
        assert!(f32::refine_tol() > 1e-6);
    }
}
