//! Scalar abstractions the numeric kernels are generic over.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};
use twofloat::TwoFloat;

/// Floating type used to evaluate the potential function of the greedy
/// builder. The builder starts in `f64` and escalates to [`TwoFloat`].
pub trait PotentialScalar: Float + FromPrimitive + Send + Sync + Debug + 'static {
    const NAME: &'static str;

    /// Value-preserving conversion. `FromPrimitive::from_f64` is not used
    /// because some implementations round through an integer.
    fn of_f64(x: f64) -> Self;

    fn from_ratio(numer: u64, denom: u64) -> Self {
        Self::from_u64(numer).expect("finite") / Self::from_u64(denom).expect("finite")
    }
}

impl PotentialScalar for f32 {
    const NAME: &'static str = "f32";

    fn of_f64(x: f64) -> Self {
        x as f32
    }
}

impl PotentialScalar for f64 {
    const NAME: &'static str = "f64";

    fn of_f64(x: f64) -> Self {
        x
    }
}

impl PotentialScalar for TwoFloat {
    const NAME: &'static str = "double-double";

    fn of_f64(x: f64) -> Self {
        TwoFloat::from(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_values_survive_conversion() {
        assert_eq!(<TwoFloat as PotentialScalar>::of_f64(0.125).hi(), 0.125);
        assert_eq!(<f32 as PotentialScalar>::of_f64(0.5), 0.5);
        let third = <TwoFloat as PotentialScalar>::from_ratio(1, 3);
        assert!((third.hi() - 1.0 / 3.0).abs() < 1e-16);
    }
}
