//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating point type the solver and analytics are generic over.
///
/// Implemented for `f32` and `f64`. Traces are always serialized through
/// `f64`, which represents every `f32` exactly.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Serialize + Send + Sync + 'static
{
    /// Lossless widening used for serialization.
    fn to_f64_lossless(self) -> f64;
    /// Narrowing from the wire representation.
    fn from_f64_wire(v: f64) -> Self;

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64_wire(v)
    }
}

impl Scalar for f64 {
    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self
    }
    #[inline]
    fn from_f64_wire(v: f64) -> Self {
        v
    }
}

impl Scalar for f32 {
    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64_wire(v: f64) -> Self {
        v as f32
    }
}

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm2<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf<S: Scalar>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |m, v| m.max(v.abs()))
}

pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `a + alpha * b`
pub fn axpy<S: Scalar>(a: &[S], alpha: S, b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + alpha * y).collect()
}

pub fn all_finite<S: Scalar>(a: &[S]) -> bool {
    a.iter().all(|v| v.is_finite())
}
