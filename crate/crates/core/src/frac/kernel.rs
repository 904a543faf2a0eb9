//! Volterra kernels: the fBm kernel `K_H`, its time derivative, the
//! variable-exponent kernel used to build a process with a prescribed
//! differentiability set, and user supplied kernels.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::HurstIndex;
use crate::quad::{integrate, QuadConfig};
use crate::rng::SeedSpec;
use crate::scalar::{lit, Real};
use crate::special::beta;

/// `c_H = sqrt(H(2H-1) / B(2-2H, H-1/2))`, defined for `H > 1/2`.
pub fn fbm_kernel_constant<T: Real>(hurst: HurstIndex<T>) -> Result<T> {
    let h = hurst.value();
    if !hurst.regular() {
        return Err(Error::UnsupportedKernelForm(h.as_f64()));
    }
    let two = lit::<T>(2.0);
    let half = lit::<T>(0.5);
    Ok((h * (two * h - T::one()) / beta(two - two * h, h - half)).sqrt())
}

/// The fBm kernel for a fixed `H ≥ 1/2`, with `c_H` computed once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmKernel<T> {
    hurst: HurstIndex<T>,
    c_h: T,
}

impl<T: Real> FbmKernel<T> {
    pub fn new(hurst: HurstIndex<T>) -> Result<Self> {
        if hurst.is_brownian() {
            return Ok(Self {
                hurst,
                c_h: T::one(),
            });
        }
        Ok(Self {
            hurst,
            c_h: fbm_kernel_constant(hurst)?,
        })
    }

    #[inline]
    pub fn hurst(&self) -> HurstIndex<T> {
        self.hurst
    }

    /// `c_H` (1 for the Brownian indicator kernel).
    #[inline]
    pub fn constant(&self) -> T {
        self.c_h
    }

    /// `K_H(t, s)`; zero when `s ≥ t`.
    pub fn eval(&self, t: T, s: T) -> Result<T> {
        if s >= t {
            return Ok(T::zero());
        }
        if self.hurst.is_brownian() {
            return Ok(T::one());
        }
        if !(s > T::zero()) {
            return Err(crate::error::invalid("s", format!("K_H(t, s) needs s > 0, got {s}")));
        }
        let p = self.hurst.value() - lit(0.5);
        // w = (u-s)^p removes the endpoint singularity
        let inv_p = T::one() / p;
        let r = integrate(
            |w: T| inv_p * (s + w.powf(inv_p)).powf(p),
            T::zero(),
            (t - s).powf(p),
            QuadConfig::rel(1e-11),
        );
        Ok(self.c_h * s.powf(-p) * r.value)
    }

    /// `∂K_H/∂t (t, s) = c_H (t/s)^{H-1/2} (t-s)^{H-3/2}` for `0 < s < t`.
    pub fn dt(&self, t: T, s: T) -> Result<T> {
        if s >= t {
            return Err(Error::DerivativeAcrossDiagonal {
                t: t.as_f64(),
                s: s.as_f64(),
            });
        }
        if self.hurst.is_brownian() {
            return Ok(T::zero());
        }
        let p = self.hurst.value() - lit(0.5);
        Ok(self.c_h * (t / s).powf(p) * (t - s).powf(p - T::one()))
    }
}

/// `K_H(t, s)` for `H ≥ 1/2`; `H < 1/2` has no closed form here.
pub fn kernel_kh<T: Real>(hurst: HurstIndex<T>, t: T, s: T) -> Result<T> {
    FbmKernel::new(hurst)?.eval(t, s)
}

pub fn kernel_kh_dt<T: Real>(hurst: HurstIndex<T>, t: T, s: T) -> Result<T> {
    FbmKernel::new(hurst)?.dt(t, s)
}

/// Kernel `(t-s)^{h(t)}` on `s < t` with `h(t) = 0` for `t ≤ c` and
/// `min(t - c, 1/4)` afterwards. Its past-forward derivative exists exactly
/// on `[0, c]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdKernel<T> {
    pub c: T,
    pub horizon: T,
}

impl<T: Real> ThresholdKernel<T> {
    pub fn exponent(&self, t: T) -> T {
        if t <= self.c {
            T::zero()
        } else {
            (t - self.c).min(lit(0.25))
        }
    }

    /// Right derivative of the exponent.
    pub fn exponent_right_dt(&self, t: T) -> T {
        if t >= self.c && t < self.c + lit(0.25) {
            T::one()
        } else {
            T::zero()
        }
    }

    pub fn eval(&self, t: T, s: T) -> T {
        if s >= t {
            T::zero()
        } else {
            (t - s).powf(self.exponent(t))
        }
    }

    /// `∂⁺K/∂t = (t-s)^{h(t)} (h'₊(t) ln(t-s) + h(t)/(t-s))`.
    pub fn right_dt(&self, t: T, s: T) -> Result<T> {
        if s >= t {
            return Err(Error::DerivativeAcrossDiagonal {
                t: t.as_f64(),
                s: s.as_f64(),
            });
        }
        let x = t - s;
        let e = self.exponent(t);
        Ok(x.powf(e) * (self.exponent_right_dt(t) * x.ln() + e / x))
    }
}

pub type KernelFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// A Volterra kernel `K(t, s)` vanishing for `s ≥ t`.
#[derive(Clone)]
pub enum KernelSpec<T> {
    Fbm(FbmKernel<T>),
    Threshold(ThresholdKernel<T>),
    Custom {
        eval: KernelFn<T>,
        right_dt: Option<KernelFn<T>>,
        description: String,
    },
}

impl<T: Real> fmt::Debug for KernelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.description())
    }
}

impl<T: Real> KernelSpec<T> {
    pub fn fbm(hurst: HurstIndex<T>) -> Result<Self> {
        Ok(Self::Fbm(FbmKernel::new(hurst)?))
    }

    pub fn threshold(c: T, horizon: T) -> Result<Self> {
        if !(c >= T::zero() && c <= horizon) {
            return Err(crate::error::invalid("c", format!("must lie in [0, T], got {c}")));
        }
        Ok(Self::Threshold(ThresholdKernel { c, horizon }))
    }

    /// Wraps a user evaluator; values at `s ≥ t` are forced to zero.
    pub fn custom(
        description: impl Into<String>,
        eval: impl Fn(T, T) -> T + Send + Sync + 'static,
        right_dt: Option<KernelFn<T>>,
    ) -> Self {
        Self::Custom {
            eval: Arc::new(eval),
            right_dt,
            description: description.into(),
        }
    }

    pub fn description(&self) -> String {
        match self {
            Self::Fbm(k) => format!("fbm(H={})", k.hurst().value()),
            Self::Threshold(k) => format!("threshold(c={}, T={})", k.c, k.horizon),
            Self::Custom { description, .. } => format!("custom({description})"),
        }
    }

    pub fn eval(&self, t: T, s: T) -> Result<T> {
        if s >= t {
            return Ok(T::zero());
        }
        let v = match self {
            Self::Fbm(k) => k.eval(t, s)?,
            Self::Threshold(k) => k.eval(t, s),
            Self::Custom { eval, .. } => eval(t, s),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteKernel {
                t: t.as_f64(),
                s: s.as_f64(),
            })
        }
    }

    /// Closed-form right `t`-derivative, if the kernel supplies one.
    pub fn closed_form_right_dt(&self, t: T, s: T) -> Option<Result<T>> {
        match self {
            Self::Fbm(k) => Some(k.dt(t, s)),
            Self::Threshold(k) => Some(k.right_dt(t, s)),
            Self::Custom { right_dt, .. } => right_dt.as_ref().map(|d| {
                if s >= t {
                    Err(Error::DerivativeAcrossDiagonal {
                        t: t.as_f64(),
                        s: s.as_f64(),
                    })
                } else {
                    Ok(d(t, s))
                }
            }),
        }
    }

    /// Right derivative, falling back to a one-sided difference with step `fd_step`.
    pub fn right_dt(&self, t: T, s: T, fd_step: T) -> Result<T> {
        if let Some(r) = self.closed_form_right_dt(t, s) {
            return r;
        }
        Ok((self.eval(t + fd_step, s)? - self.eval(t, s)?) / fd_step)
    }

    /// Randomised check of the Volterra property: `K(t, s) = 0` for `s ≥ t`.
    pub fn check_volterra(&self, horizon: T, probes: usize, seed: SeedSpec) -> Result<()> {
        let mut rng = seed.path_rng(u64::MAX, 0);
        for _ in 0..probes {
            let a: f64 = rng.random::<f64>() * horizon.as_f64();
            let b: f64 = rng.random::<f64>() * horizon.as_f64();
            let (t, s) = (T::lit(a.min(b)), T::lit(a.max(b)));
            let raw = match self {
                Self::Custom { eval, .. } => eval(t, s),
                _ => self.eval(t, s)?,
            };
            if raw != T::zero() {
                return Err(crate::error::invalid(
                    "kernel",
                    format!("{} is not Volterra: K({t}, {s}) = {raw}", self.description()),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_both_singular, integrate_right_singular};

    fn h(v: f64) -> HurstIndex<f64> {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn vanishes_above_diagonal_and_brownian_case() {
        assert_eq!(kernel_kh(h(0.75), 0.5, 0.5).unwrap(), 0.0);
        assert_eq!(kernel_kh(h(0.75), 0.5, 0.9).unwrap(), 0.0);
        assert_eq!(kernel_kh(h(0.5), 1.0, 0.3).unwrap(), 1.0);
        assert_eq!(kernel_kh_dt(h(0.5), 1.0, 0.3).unwrap(), 0.0);
        assert!(matches!(kernel_kh(h(0.3), 1.0, 0.5), Err(Error::UnsupportedKernelForm(_))));
        assert!(matches!(
            kernel_kh_dt(h(0.75), 0.5, 0.5),
            Err(Error::DerivativeAcrossDiagonal { .. })
        ));
    }

    #[test]
    fn factorises_the_covariance() {
        // R_H(s,t) = ∫_0^{s∧t} K_H(s,u) K_H(t,u) du
        let k = FbmKernel::new(h(0.75)).unwrap();
        for (s, t) in [(1.0, 1.0), (0.5, 1.0), (0.3, 0.8)] {
            let r = integrate_both_singular(
                |u: f64| k.eval(s, u).unwrap() * k.eval(t, u).unwrap(),
                0.0,
                f64::min(s, t),
                -0.5,
                0.0,
                QuadConfig::rel(1e-9),
            );
            let cov = 0.5 * (f64::powf(s, 1.5) + f64::powf(t, 1.5) - f64::powf((t - s).abs(), 1.5));
            assert!((r.value - cov).abs() < 1e-4, "({s},{t}): {} vs {cov}", r.value);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let k = FbmKernel::new(h(0.75)).unwrap();
        let (t, s) = (1.0, 0.5);
        let eps = 1e-5;
        let fd = (k.eval(t + eps, s).unwrap() - k.eval(t - eps, s).unwrap()) / (2.0 * eps);
        let cf = k.dt(t, s).unwrap();
        assert!(((fd - cf) / cf).abs() < 1e-4);
        let expected = k.constant() * 2f64.powf(0.25) * 0.5f64.powf(-0.75);
        assert!((cf - expected).abs() < 1e-13);
    }

    #[test]
    fn squared_derivative_blows_up_at_diagonal() {
        let k = FbmKernel::new(h(0.75)).unwrap();
        let part = |delta: f64| {
            integrate_right_singular(
                |s: f64| k.dt(1.0, s).unwrap().powi(2),
                0.5,
                1.0 - delta,
                0.0,
                QuadConfig::default(),
            )
            .value
        };
        assert!(part(1e-6) > 10.0 * part(1e-3));
    }

    #[test]
    fn threshold_kernel_shape() {
        let k = ThresholdKernel { c: 0.5f64, horizon: 1.0 };
        assert_eq!(k.eval(0.4, 0.1), 1.0);
        assert_eq!(k.exponent(0.9), 0.25);
        assert!((k.exponent(0.6) - 0.1).abs() < 1e-15);
        assert_eq!(k.right_dt(0.4, 0.1).unwrap(), 0.0);
        let spec = KernelSpec::threshold(0.5, 1.0).unwrap();
        spec.check_volterra(1.0, 200, SeedSpec::new(1)).unwrap();
    }

    #[test]
    fn custom_kernel_volterra_probe_catches_leaks() {
        let leaky = KernelSpec::custom("leaky", |_t: f64, _s: f64| 1.0, None);
        assert!(leaky.check_volterra(1.0, 50, SeedSpec::new(3)).is_err());
        let nan = KernelSpec::custom("nan", |t: f64, s: f64| if s < t { f64::NAN } else { 0.0 }, None);
        assert!(matches!(nan.eval(1.0, 0.2), Err(Error::NonFiniteKernel { .. })));
    }
}
