//! Scalar abstraction shared by every geometric and kinematic module.

use nalgebra::RealField;
use num_traits::ToPrimitive;
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar used throughout the crate.
///
/// Implemented for `f32` and `f64`. Numeric literals go through [`Real::lit`]
/// so generic code reads close to the `f64` original.
pub trait Real:
    RealField + Copy + Default + ToPrimitive + Serialize + DeserializeOwned + Send + Sync + 'static
{
    #[inline]
    fn lit(v: f64) -> Self {
        nalgebra::convert(v)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_count(v: usize) -> Self {
        Self::lit(v as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}
