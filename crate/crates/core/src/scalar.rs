//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All math is written against [`Real`]; `f64` is the working precision used
//! by the aliases at the crate root and by the CLI, `f32` is supported for
//! memory-bound ensemble work.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

mod sealed {
    pub trait Sealed {}
    impl Sealed for f32 {}
    impl Sealed for f64 {}
}

/// Floating-point scalar usable by the samplers, quadratures and estimators.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + rustfft::FftNum
    + sealed::Sealed
    + 'static
{
    /// Machine epsilon scaled tolerance floor used by iterative routines.
    const TOL_FLOOR: f64;

    /// Draw one exact standard normal variate (ziggurat).
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Convert an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const TOL_FLOOR: f64 = 1e-14;

    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Real for f32 {
    const TOL_FLOOR: f64 = 1e-6;

    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}
