//! Gamma and Beta functions.
//!
//! `ln_gamma` uses the 14-term Lanczos-type series with g = 671/128, which is
//! accurate to a few ulps in double precision for positive arguments.

use crate::scalar::{lit, Real};

const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

/// `ln Γ(x)` for `x > 0`. Returns NaN otherwise.
pub fn ln_gamma<T: Real>(x: T) -> T {
    if !(x > T::zero()) {
        return T::nan();
    }
    let mut y = x;
    let tmp = x + lit(5.242_187_5);
    let tmp = (x + lit(0.5)) * tmp.ln() - tmp;
    let mut ser: T = lit(0.999_999_999_999_997_092);
    for c in LANCZOS {
        y += T::one();
        ser += lit::<T>(c) / y;
    }
    tmp + (lit::<T>(2.506_628_274_631_000_5) * ser / x).ln()
}

/// `Γ(x)`; negative non-integers go through the reflection formula, poles
/// return infinity.
pub fn gamma<T: Real>(x: T) -> T {
    if x > T::zero() {
        // small positive integers exactly
        if x <= lit(20.0) && x == x.round() {
            let mut acc = T::one();
            let mut k = T::one();
            while k < x {
                acc *= k;
                k += T::one();
            }
            return acc;
        }
        ln_gamma(x).exp()
    } else if x == x.round() {
        T::infinity()
    } else {
        let pi = T::PI();
        pi / ((pi * x).sin() * gamma(T::one() - x))
    }
}

/// `B(a, b) = Γ(a)Γ(b)/Γ(a+b)` for positive arguments.
pub fn beta<T: Real>(a: T, b: T) -> T {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}
