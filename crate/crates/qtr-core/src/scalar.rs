//! The scalar abstraction behind every tensor.
//!
//! The precision mode of the toolkit is the scalar type itself: `f64` is
//! verification mode, `f32` is benchmark mode.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable in tensors, tapes and models.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` for constants and config values.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    /// Widen to `f64` for reporting and metrics.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar widens to f64")
    }

    /// Little-endian bytes of this value, used for hashing and checkpoints.
    fn to_le_bytes_vec(self) -> Vec<u8>;
}

impl Scalar for f32 {
    fn to_le_bytes_vec(self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
}

impl Scalar for f64 {
    fn to_le_bytes_vec(self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
}
