//! Floating-point abstraction used by every numeric routine.
//!
//! All estimators are generic over [`Scalar`] so the same code serves `f32`
//! and `f64`; the crate root re-exports `f64`-concrete aliases for the types
//! most callers want. The trait adds the handful of conversions that
//! `num_traits::Float` does not provide without `Option` plumbing.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign};

pub trait Scalar:
    Float + FloatConst + NumAssign + Sum<Self> + Debug + Display + Send + Sync + 'static
{
    fn from_usize(n: usize) -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `1/x` as a convenience for the frequent `1/n` factors.
    #[inline]
    fn recip_usize(n: usize) -> Self {
        Self::one() / Self::from_usize(n)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_usize(n: usize) -> Self {
        n as f64
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_usize(n: usize) -> Self {
        n as f32
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

/// Neumaier-compensated accumulator.
///
/// The O(n log n) distance-covariance path and the three-sum expansion both
/// cancel large positive terms down to a tiny result; plain summation loses
/// enough digits there to break the 1e-10 agreement contract with the naive
/// path, so those sums run through this.
#[derive(Clone, Copy, Debug)]
pub struct Kahan<F> {
    sum: F,
    comp: F,
}

impl<F: Scalar> Kahan<F> {
    #[inline]
    pub fn new() -> Self {
        Kahan {
            sum: F::zero(),
            comp: F::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: F) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> F {
        self.sum + self.comp
    }
}

impl<F: Scalar> Default for Kahan<F> {
    fn default() -> Self {
        Self::new()
    }
}
