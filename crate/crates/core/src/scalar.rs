//! Numeric scalar abstraction.
//!
//! All of the linear algebra and the closed-form statistics are written against
//! [`Scalar`], so the same code runs in `f64` (the default everywhere in the
//! protocol engines) and in `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// A real floating-point type usable as the field of the 3-box Hilbert space.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance for algebraic identities (normalisation, Born sums).
    fn algebra_tol() -> Self;
    /// Tolerance for checks on constructed matrices (unitarity, idempotence, completeness).
    fn matrix_tol() -> Self;
    /// Probability below which a projection branch is treated as impossible.
    fn zero_prob() -> Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Scalar for f64 {
    fn algebra_tol() -> Self {
        1e-12
    }
    fn matrix_tol() -> Self {
        1e-10
    }
    fn zero_prob() -> Self {
        1e-14
    }
}

impl Scalar for f32 {
    fn algebra_tol() -> Self {
        1e-5
    }
    fn matrix_tol() -> Self {
        1e-5
    }
    fn zero_prob() -> Self {
        1e-7
    }
}
