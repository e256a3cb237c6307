//! Scalar abstraction: the numerical core is generic over the floating-point
//! type. `f64` is the default everywhere; `f32` is available for quick,
//! low-precision experiments (the shipped tolerances assume `f64`).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar for all kernel, flow, quadrature and path math.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Conversion to `f64` for reporting and statistics (lossless for f32/f64).
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn as_f64(self) -> f64 {
        self
    }
}

/// Shorthand for embedding an `f64` literal into the generic scalar type.
#[inline]
pub(crate) fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("literal not representable in scalar type")
}
