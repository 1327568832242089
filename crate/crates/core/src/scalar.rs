//! Floating-point abstraction shared by the numeric modules.
//!
//! Everything that does arithmetic on weights, activations or attributions is
//! generic over [`Scalar`]; `f64` is the working precision of the CLI and the
//! file formats, `f32` is supported for lighter simulations.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or configuration value.
    #[inline]
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::of(v as f64)
    }

    /// Probability clamp used for every soft output.
    #[inline]
    fn prob_eps() -> Self {
        Self::of(crate::nn::PROB_EPS)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
pub fn sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}
