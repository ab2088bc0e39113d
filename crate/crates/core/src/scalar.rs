//! Scalar abstraction for the spectral core.
//!
//! Everything downstream (fields, propagators, saturation trees, schedules)
//! is generic over a real scalar type. `f64` is the working precision; the
//! crate root exports concrete aliases for it. `f32` satisfies the same
//! contract with looser pruning, which is useful for quick smoke runs but
//! not for the tolerance suite.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Relative threshold below which stored spectral coefficients are dropped.
    const PRUNE_REL: Self;

    /// Conversion from an `f64` literal. Panics on values the type cannot
    /// represent at all (never the case for finite literals).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    const PRUNE_REL: Self = 1e-14;

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const PRUNE_REL: Self = 1e-5;

    fn to_f64(self) -> f64 {
        self as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_conversion_round_trips() {
        assert_eq!(f64::of(0.5), 0.5);
        assert_eq!(f32::of(0.25), 0.25f32);
        assert_eq!(1.5f64.to_f64(), 1.5);
    }

    #[test]
    #[allow(clippy::assertions_on_constants)]
    fn prune_threshold_is_far_above_machine_epsilon() {
        assert!(f64::PRUNE_REL > f64::EPSILON * 10.0);
        assert!(f32::PRUNE_REL > f32::EPSILON * 10.0);
    }
}
