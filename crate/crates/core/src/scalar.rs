//! Scalar abstraction shared by every exact computation in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point type usable for amplitudes: `f32` or `f64`.
///
/// The associated tolerances scale with the precision of the type. For `f64`
/// they are the values the simulator's contracts are stated in.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance for conservation checks (unitarity, probability sums, fidelity).
    const CHECK_EPS: f64;
    /// Tolerance for validating user inputs such as Jones vector normalization.
    const INPUT_EPS: f64;
    /// Amplitudes with magnitude at or below this are dropped from sparse states.
    const PRUNE_EPS: f64;

    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 converts")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    #[inline]
    fn check_eps() -> Self {
        Self::of(Self::CHECK_EPS)
    }

    #[inline]
    fn input_eps() -> Self {
        Self::of(Self::INPUT_EPS)
    }

    #[inline]
    fn prune_eps() -> Self {
        Self::of(Self::PRUNE_EPS)
    }
}

impl Real for f64 {
    const CHECK_EPS: f64 = 1e-12;
    const INPUT_EPS: f64 = 1e-9;
    const PRUNE_EPS: f64 = 1e-15;
}

impl Real for f32 {
    const CHECK_EPS: f64 = 1e-5;
    const INPUT_EPS: f64 = 1e-5;
    const PRUNE_EPS: f64 = 1e-7;
}
