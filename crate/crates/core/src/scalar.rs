//! Scalar abstraction shared by the dense linear-algebra substrate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable by [`DenseMatrix`](crate::tensor::DenseMatrix) and the
/// routines built on it.
///
/// Implemented for `f32` and `f64`. Pipelines default to `f64`; embedding files
/// stored as 32-bit floats are widened on load.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Machine epsilon used by iterative routines to decide convergence.
    const EPS: Self;

    /// Converts an `f64` literal, saturating through `as` semantics.
    fn lit(x: f64) -> Self;

    /// Widens to `f64`.
    fn to_f64_lossless(self) -> f64;
}

impl Real for f64 {
    const EPS: Self = f64::EPSILON;

    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self
    }
}

impl Real for f32 {
    const EPS: Self = f32::EPSILON;

    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
}
