//! Scalar abstraction shared by the generic parts of the crate.

use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar usable by the geometry and kernel code.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion to `f64`, used for error reporting and I/O.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn dot2<F: Real>(a: [F; 2], b: [F; 2]) -> F {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm2<F: Real>(a: [F; 2]) -> F {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn sub2<F: Real>(a: [F; 2], b: [F; 2]) -> [F; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn axpy2<F: Real>(a: F, x: [F; 2], y: [F; 2]) -> [F; 2] {
    [a * x[0] + y[0], a * x[1] + y[1]]
}

#[inline]
pub(crate) fn cross2<F: Real>(a: [F; 2], b: [F; 2]) -> F {
    a[0] * b[1] - a[1] * b[0]
}

/// Rotates `v` counter-clockwise by `angle`.
#[inline]
pub(crate) fn rotate2<F: Real>(v: [F; 2], angle: F) -> [F; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}
