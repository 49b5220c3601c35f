//! Scalar abstraction shared by the numeric modules.
//!
//! Everything that does arithmetic on rewards, values, or continuous states is
//! written against [`Scalar`] so it runs unchanged in `f32` or `f64`. The
//! concrete `f64` instantiations are re-exported as aliases from the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + Sum + 'static
{
    /// Lift an `f64` literal or configuration value into `Self`.
    fn lit(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle<S: Scalar>(a: S) -> S {
    let two_pi = S::PI() + S::PI();
    let mut w = a % two_pi;
    if w <= -S::PI() {
        w += two_pi;
    } else if w > S::PI() {
        w -= two_pi;
    }
    w
}

#[inline]
pub fn clamp<S: Scalar>(v: S, lo: S, hi: S) -> S {
    v.max(lo).min(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_keeps_pi_and_maps_minus_pi_up() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-7.0 * PI) - PI).abs() < 1e-12);
        assert_eq!(wrap_angle(0.25f32), 0.25f32);
    }
}
