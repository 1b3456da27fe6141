//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All image and loss math is written against [`Real`], which is implemented
//! for `f32` and `f64`. Reductions go through [`pairwise_sum`] so that results
//! are reproducible for a fixed input order.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable")
}

/// Convert a count into `T`.
#[inline]
pub fn from_usize<T: Real>(v: usize) -> T {
    T::from_usize(v).expect("count representable")
}

#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

const PAIRWISE_LEAF: usize = 16;

/// Pairwise (cascade) summation. Deterministic for a fixed slice order and
/// with O(log n) error growth.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    if values.len() <= PAIRWISE_LEAF {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Collect an iterator and sum it pairwise.
pub fn sum_iter<T: Real, I: IntoIterator<Item = T>>(iter: I) -> T {
    let values: Vec<T> = iter.into_iter().collect();
    pairwise_sum(&values)
}
