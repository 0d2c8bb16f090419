use std::fmt::Debug;

use num_traits::{Float, FloatConst};

/// Floating-point scalar accepted by the interpolation and bound machinery.
pub trait Scalar: Float + FloatConst + Debug + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;

    fn from_usize(v: usize) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn from_usize(v: usize) -> Self {
        v as f64
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn from_usize(v: usize) -> Self {
        v as f32
    }
}
