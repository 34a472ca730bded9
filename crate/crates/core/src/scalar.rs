//! Scalar abstraction over the floating-point type used by the whole crate.
//!
//! Every cost, demand and model weight is generic over [`Scalar`], so the
//! solvers and the statistical model run in `f32` or `f64` unchanged. The
//! crate root exposes `f64` aliases, which is what the CLI and the
//! experiment drivers use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::{Rng, RngExt};
use rand_distr::uniform::SampleUniform;
use rand_distr::{Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + SampleUniform
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// One draw from the standard normal distribution.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from the uniform distribution on the half-open range `[lo, hi)`.
    fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
        rng.random_range(lo..hi)
    }

    /// Lossless-enough conversion from machine-size counts.
    fn from_count(value: usize) -> Self {
        Self::from_usize(value).expect("count representable as scalar")
    }

    /// Shorthand for converting literal constants.
    fn c(value: f64) -> Self {
        Self::from_f64(value).expect("constant representable as scalar")
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Positive part `max(x, 0)`.
pub fn pos<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x
    } else {
        F::zero()
    }
}

/// Negative part as a magnitude: `max(-x, 0)`.
pub fn neg<F: Scalar>(x: F) -> F {
    if x < F::zero() {
        -x
    } else {
        F::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn positive_and_negative_parts() {
        assert_eq!(pos(3.0), 3.0);
        assert_eq!(pos(-3.0), 0.0);
        assert_eq!(neg(-3.0), 3.0);
        assert_eq!(neg(3.0), 0.0);
        assert_eq!(pos(0.0), 0.0);
        assert_eq!(neg(0.0), 0.0);
    }

    #[test]
    fn uniform_draws_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x = f64::uniform(&mut rng, 2.0, 5.0);
            assert!((2.0..5.0).contains(&x));
        }
    }

    #[test]
    fn f32_and_f64_share_the_trait() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let _: f32 = f32::standard_normal(&mut rng);
        let _: f64 = f64::standard_normal(&mut rng);
        assert_eq!(f32::from_count(3), 3.0f32);
        assert_eq!(f64::c(0.5), 0.5);
    }
}
