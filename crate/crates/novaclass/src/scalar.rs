//! Floating-point scalar abstraction.
//!
//! All numeric code in this crate is generic over [`Real`] so the same
//! kernels run in `f32` (production paths) and `f64` (gradient checks and
//! high-precision tests).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Scalar type accepted by every numeric routine in this crate.
pub trait Real:
    Float + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and hyperparameters.
    fn of(v: f64) -> Self;

    /// Widening conversion to `f64`, used for reporting and accumulation.
    fn to_f64(self) -> f64;

    /// Parses the decimal text produced by this type's `Display`, which is
    /// shortest-round-trip in Rust — so save/load through text is exact.
    fn parse_str(s: &str) -> Option<Self>;
}

impl Real for f32 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        f64::from(self)
    }

    #[inline(always)]
    fn parse_str(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Real for f64 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline(always)]
    fn parse_str(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}
