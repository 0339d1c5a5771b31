//! Scalar abstraction: the DSP core is generic over the sample type.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar for audio samples and feature values: `f32` or `f64`.
pub trait Sample:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Send + Sync + 'static
{
}

impl<T> Sample for T where
    T: Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Send + Sync + 'static
{
}
