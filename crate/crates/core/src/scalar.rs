//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Floating point type the solvers are generic over (`f32` or `f64`).
///
/// Special functions are evaluated in double precision and rounded to the
/// target type, so `f32` runs share the same coefficient definitions.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + FftNum
{
    /// Converts an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 value representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    /// Euler Gamma function.
    #[inline]
    fn tgamma(self) -> Self {
        Self::of(libm::tgamma(self.as_f64()))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Riemann–Liouville kernel `t^(order-1) / Gamma(order)`, zero for `t <= 0`.
pub fn rl_kernel<S: Scalar>(order: S, t: S) -> S {
    if t <= S::zero() {
        return S::zero();
    }
    t.powf(order - S::one()) / order.tgamma()
}

/// `(base + delta)^p - base^p` for `base >= 0`, `delta >= 0`, without cancellation
/// when `delta` is small relative to `base`.
pub(crate) fn diff_pow<S: Scalar>(base: S, delta: S, p: S) -> S {
    if delta == S::zero() {
        return S::zero();
    }
    if base <= S::zero() {
        return delta.powf(p);
    }
    base.powf(p) * (p * (delta / base).ln_1p()).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_matches_known_values() {
        assert!((1.5f64.tgamma() - 0.886_226_925_452_758).abs() < 1e-15);
        assert!((5.0f64.tgamma() - 24.0).abs() < 1e-12);
        assert!((0.5f32.tgamma() - std::f32::consts::PI.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn diff_pow_is_stable_for_close_arguments() {
        let stable = diff_pow(1.0f64, 1e-9, 0.4);
        assert!((stable - 0.4e-9).abs() < 1e-18);
        let direct = 1.5f64.powf(0.4) - 1.0;
        assert!((diff_pow(1.0f64, 0.5, 0.4) - direct).abs() < 1e-15);
        assert_eq!(diff_pow(2.0f64, 0.0, 0.3), 0.0);
        assert_eq!(diff_pow(0.0f64, 4.0, 0.5), 2.0);
    }

    #[test]
    fn rl_kernel_vanishes_for_nonpositive_time() {
        assert_eq!(rl_kernel(0.5f64, 0.0), 0.0);
        assert!((rl_kernel(0.5f64, 1.0) - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
    }
}
