//! Floating-point scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used for amplitudes, energies and probabilities.
///
/// Implemented for `f32` and `f64`. The associated tolerances scale with the
/// precision of the type: the defaults for `f64` are the ones the invariants
/// in this crate are stated against.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
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
    /// Tolerance on `| ||v||^2 - 1 |` for operations that require a unit vector.
    fn unit_tol() -> Self;
    /// Default absolute residual target for eigenpairs.
    fn eigen_tol() -> Self;
    /// Default absolute residual target for linear solves.
    fn solve_tol() -> Self;

    /// Lossy conversion from `f64`; used for literals.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_i64_lossy(x: i64) -> Self {
        Self::from_i64(x).expect("integer representable")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("integer representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn unit_tol() -> Self {
        1e-12
    }
    fn eigen_tol() -> Self {
        1e-9
    }
    fn solve_tol() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    fn unit_tol() -> Self {
        1e-5
    }
    fn eigen_tol() -> Self {
        1e-4
    }
    fn solve_tol() -> Self {
        1e-5
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..1000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 1000.0);
    }

    #[test]
    fn literals_round_trip() {
        assert_eq!(<f64 as Scalar>::lit(0.25), 0.25);
        assert_eq!(<f32 as Scalar>::lit(0.25), 0.25f32);
    }
}
