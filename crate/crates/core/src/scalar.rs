//! Scalar abstraction for the simulation numerics.
//!
//! Everything numeric in this crate is written against [`RealScalar`], which
//! is satisfied by `f32` and `f64`. Random draws are always produced in `f64`
//! and then converted, so the sample stream feeding a simulation is identical
//! regardless of the scalar the matrices are stored in.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type usable throughout the crate: a native float with the
/// field operations nalgebra needs plus lossless-enough conversion from the
/// `f64` constants the models are specified in.
pub trait RealScalar: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` constant into this scalar type.
    ///
    /// Panics if the value is not representable, which only happens for
    /// non-finite inputs; model constants are always finite.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite constant must convert")
    }

    /// Converts to `f64` for reporting. `f32` and `f64` both convert exactly.
    #[inline]
    fn to64(self) -> f64 {
        self.to_f64().expect("real scalar converts to f64")
    }
}

impl<T> RealScalar for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}
