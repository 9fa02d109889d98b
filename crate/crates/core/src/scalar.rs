//! Floating-point abstraction used by every cost and distance computation.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the solver is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal; every supported scalar can represent (an approximation of) it.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion from f64")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("scalar conversion from usize")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar conversion to f64")
    }

    /// Absolute tolerance scaled by magnitude: `tol * max(1, |a|, |b|)`.
    #[inline]
    fn approx_eq(self, other: Self, tol: f64) -> bool {
        let scale = Self::one().max(self.abs()).max(other.abs());
        (self - other).abs() <= Self::lit(tol) * scale
    }

    /// `self^p`, exact repeated multiplication for integer exponents up to 4.
    fn powp(self, p: Self) -> Self {
        let pf = p.as_f64();
        if pf == 1.0 {
            self
        } else if pf == 2.0 {
            self * self
        } else if pf == 3.0 {
            self * self * self
        } else if pf == 4.0 {
            let s = self * self;
            s * s
        } else if self <= Self::zero() {
            if pf == 0.0 {
                Self::one()
            } else {
                Self::zero()
            }
        } else {
            (p * self.ln()).exp()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Default relative tolerance for cost comparisons.
pub const TOL: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_powers_are_exact() {
        assert_eq!(3.0f64.powp(2.0), 9.0);
        assert_eq!(1.5f64.powp(3.0), 3.375);
        assert_eq!(2.0f64.powp(4.0), 16.0);
        assert_eq!(0.0f64.powp(1.5), 0.0);
        assert!((2.0f64.powp(1.5) - 2.0f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn approx_eq_scales_with_magnitude() {
        assert!(1e12f64.approx_eq(1e12 + 1.0, 1e-9));
        assert!(!1.0f64.approx_eq(1.0 + 1e-6, 1e-9));
        assert!(2.0f32.approx_eq(2.0, 1e-6));
    }
}
