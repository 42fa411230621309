//! Scalar abstraction for the divergence and evaluation math.
//!
//! The metric kernels (JSD, IoU, recall aggregation) are generic over any
//! floating-point scalar; the file formats and the pipeline pin `f64`
//! through the [`Scalar`](crate::Scalar) alias.

use num_traits::Float;

/// Floating-point scalar usable by the metric kernels.
pub trait Real: Float + std::fmt::Debug + std::fmt::Display + 'static {
    /// Base-2 logarithm (not part of `num_traits::Float`'s minimal surface
    /// on all scalars, so routed through `ln`).
    fn log2_(self) -> Self {
        self.ln() / Self::from(std::f64::consts::LN_2).unwrap()
    }

    fn from_f64(v: f64) -> Self {
        Self::from(v).unwrap()
    }

    fn from_usize(v: usize) -> Self {
        Self::from(v).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}
