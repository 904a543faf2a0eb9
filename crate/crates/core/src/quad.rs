//! Adaptive Gauss–Kronrod quadrature and power-singularity substitutions.
//!
//! Integrands with an algebraic endpoint singularity `(u - a)^λ`, `λ > -1`,
//! are never handed to a plain rule: the substitution `u = a + w^m` with
//! `m = 1/(1+λ)` turns them into bounded integrands first.

use crate::scalar::{lit, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_intervals: 400,
        }
    }
}

impl QuadConfig {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

fn kronrod15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = (b - a) * lit(0.5);
    let center = (a + b) * lit(0.5);
    let fc = f(center);
    let mut resk = fc * lit(WGK[7]);
    let mut resg = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = half * lit(XGK[j]);
        let s = f(center - dx) + f(center + dx);
        resk += s * lit(WGK[j]);
        if j % 2 == 1 {
            resg += s * lit(WG[j / 2]);
        }
    }
    let value = resk * half;
    let err = ((resk - resg) * half).abs();
    (value, err)
}

/// Globally adaptive G7/K15 on a finite interval.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, cfg: QuadConfig) -> QuadResult<T> {
    if a == b {
        return QuadResult {
            value: T::zero(),
            error: T::zero(),
            evaluations: 0,
        };
    }
    let (v, e) = kronrod15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut evaluations = 15;
    let abs_tol: T = lit(cfg.abs_tol);
    let rel_tol: T = lit(cfg.rel_tol.max(T::TOL_FLOOR));
    loop {
        let total: T = intervals.iter().map(|x| x.2).sum();
        let err: T = intervals.iter().map(|x| x.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || intervals.len() >= cfg.max_intervals {
            return QuadResult {
                value: total,
                error: err,
                evaluations,
            };
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, x)| {
                if x.3 > acc.1 {
                    (i, x.3)
                } else {
                    acc
                }
            });
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = (lo + hi) * lit(0.5);
        if mid <= lo || mid >= hi {
            // interval exhausted at working precision
            let total: T = intervals.iter().map(|x| x.2).sum::<T>();
            let (v, e) = kronrod15(&f, lo, hi);
            return QuadResult {
                value: total + v,
                error: err.max(e),
                evaluations: evaluations + 15,
            };
        }
        let (v1, e1) = kronrod15(&f, lo, mid);
        let (v2, e2) = kronrod15(&f, mid, hi);
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// `∫_a^b f(u) du` where `f(u) ~ (u-a)^λ` near `a`, `λ > -1`.
pub fn integrate_left_singular<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    lambda: T,
    cfg: QuadConfig,
) -> QuadResult<T> {
    graded(|s| a + s, a, b, lambda, f, cfg)
}

/// `∫_a^b f(u) du` where `f(u) ~ (b-u)^λ` near `b`, `λ > -1`.
pub fn integrate_right_singular<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    lambda: T,
    cfg: QuadConfig,
) -> QuadResult<T> {
    graded(|s| b - s, b, a, lambda, f, cfg)
}

/// Substitutes `s = w^m`, `m = 1/(1+λ)`, with `s` the distance from the
/// singular endpoint `at` towards `other`.
fn graded<T: Real, F: Fn(T) -> T>(
    point: impl Fn(T) -> T,
    at: T,
    other: T,
    lambda: T,
    f: F,
    cfg: QuadConfig,
) -> QuadResult<T> {
    debug_assert!(lambda > -T::one());
    let len = (other - at).abs();
    if !(len > T::zero()) {
        return integrate(|_| T::zero(), T::zero(), T::zero(), cfg);
    }
    let m = T::one() / (T::one() + lambda);
    let upper = len.powf(T::one() / m);
    integrate(
        |w: T| {
            let u = point(w.powf(m).min(len));
            if w <= T::zero() || u == at {
                // offset below one ulp of the endpoint; the sliver is negligible
                return T::zero();
            }
            m * f(u) * w.powf(m - T::one())
        },
        T::zero(),
        upper,
        cfg,
    )
}

/// Both endpoints singular: split at the midpoint.
pub fn integrate_both_singular<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    lambda_left: T,
    lambda_right: T,
    cfg: QuadConfig,
) -> QuadResult<T> {
    let mid = (a + b) * lit(0.5);
    let l = integrate_left_singular(&f, a, mid, lambda_left, cfg);
    let r = integrate_right_singular(&f, mid, b, lambda_right, cfg);
    QuadResult {
        value: l.value + r.value,
        error: l.error + r.error,
        evaluations: l.evaluations + r.evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_polynomial_exact() {
        let r = integrate(|x: f64| 3.0 * x * x, 0.0, 2.0, QuadConfig::default());
        assert!((r.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory() {
        let r = integrate(|x: f64| (10.0 * x).sin(), 0.0, 3.0, QuadConfig::default());
        let exact = (1.0 - (30.0_f64).cos()) / 10.0;
        assert!((r.value - exact).abs() < 1e-11);
    }

    #[test]
    fn left_singularity_removed() {
        // ∫_0^1 u^{-0.75} du = 4
        let r = integrate_left_singular(|u: f64| u.powf(-0.75), 0.0, 1.0, -0.75, QuadConfig::default());
        assert!((r.value - 4.0).abs() < 1e-11, "{}", r.value);
        // ∫_1^2 (2-u)^{-0.5} e^u du
        let r = integrate_right_singular(
            |u: f64| (2.0 - u).powf(-0.5) * u.exp(),
            1.0,
            2.0,
            -0.5,
            QuadConfig::default(),
        );
        let reference = integrate(
            |w: f64| 2.0 * (2.0 - w * w).exp(),
            0.0,
            1.0,
            QuadConfig::default(),
        );
        assert!((r.value - reference.value).abs() < 1e-11);
    }

    #[test]
    fn both_ends() {
        // ∫_0^1 u^{-1/2}(1-u)^{-1/2} du = π
        let r = integrate_both_singular(
            |u: f64| u.powf(-0.5) * (1.0 - u).powf(-0.5),
            0.0,
            1.0,
            -0.5,
            -0.5,
            QuadConfig::default(),
        );
        assert!((r.value - std::f64::consts::PI).abs() < 1e-10);
    }
}
