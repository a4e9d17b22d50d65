//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point type the library computes in (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance for point-on-line and point-in-region tests.
    fn geometric_tol() -> Self;
    /// Relative magnitude below which an LU pivot is treated as zero.
    fn pivot_tol() -> Self;
    /// Relative residual a direct solve is expected to reach.
    fn solve_tol() -> Self;
}

impl Scalar for f64 {
    fn geometric_tol() -> Self {
        1e-12
    }
    fn pivot_tol() -> Self {
        1e-13
    }
    fn solve_tol() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    fn geometric_tol() -> Self {
        1e-5
    }
    fn pivot_tol() -> Self {
        1e-6
    }
    fn solve_tol() -> Self {
        1e-4
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("integer representable in scalar type")
}

#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// A point of the plane.
pub type Point<T> = [T; 2];
