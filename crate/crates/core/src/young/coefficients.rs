//! Diffusion coefficients `σ, b` with their derivatives and metadata.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::SeedSpec;
use crate::scalar::{lit, Real};

pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// `σ, b, σ', b', σ''` and the initial value, for `dX = σ(X) dB + b(X) dt`.
#[derive(Clone)]
pub struct CoefficientSet<T> {
    pub name: String,
    pub sigma: ScalarFn<T>,
    pub b: ScalarFn<T>,
    pub sigma_prime: ScalarFn<T>,
    pub b_prime: ScalarFn<T>,
    pub sigma_second: ScalarFn<T>,
    pub x0: T,
    /// `b = r σ` when set.
    pub proportional: Option<T>,
    pub sup_sigma: T,
    pub sup_b: T,
    pub elliptic: bool,
}

impl<T: Real> fmt::Debug for CoefficientSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("x0", &self.x0)
            .field("proportional", &self.proportional)
            .field("elliptic", &self.elliptic)
            .finish()
    }
}

fn arc<T>(f: impl Fn(T) -> T + Send + Sync + 'static) -> ScalarFn<T> {
    Arc::new(f)
}

// probe lattice for sup-norms and ellipticity
fn lattice<T: Real>(x0: T) -> impl Iterator<Item = T> {
    let half_width = lit::<T>(10.0) + x0.abs();
    (0..=2000).map(move |i| x0 - half_width + half_width * lit::<T>(i as f64 / 1000.0))
}

impl<T: Real> CoefficientSet<T> {
    /// Builds the set and fills the metadata by probing; `b = rσ` is
    /// detected on the probe lattice.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        sigma: ScalarFn<T>,
        b: ScalarFn<T>,
        sigma_prime: ScalarFn<T>,
        b_prime: ScalarFn<T>,
        sigma_second: ScalarFn<T>,
        x0: T,
        proportional: Option<T>,
    ) -> Self {
        let mut c = Self {
            name: name.into(),
            sigma,
            b,
            sigma_prime,
            b_prime,
            sigma_second,
            x0,
            proportional,
            sup_sigma: T::zero(),
            sup_b: T::zero(),
            elliptic: false,
        };
        let mut min_sigma = T::infinity();
        let mut signs = (false, false);
        for x in lattice(x0) {
            let sv = (c.sigma)(x);
            signs.0 |= sv > T::zero();
            signs.1 |= sv < T::zero();
            let s = sv.abs();
            c.sup_sigma = c.sup_sigma.max(s);
            c.sup_b = c.sup_b.max((c.b)(x).abs());
            min_sigma = min_sigma.min(s);
        }
        c.elliptic = min_sigma > T::zero() && !(signs.0 && signs.1);
        c
    }

    /// `σ ≡ 1, b ≡ 0`.
    pub fn constant(x0: T) -> Self {
        Self::new("constant", arc(|_| T::one()), arc(|_| T::zero()), arc(|_| T::zero()), arc(|_| T::zero()), arc(|_| T::zero()), x0, None)
    }

    /// `σ(x) = x, b ≡ 0`.
    pub fn linear(x0: T) -> Self {
        Self::new("linear", arc(|x| x), arc(|_| T::zero()), arc(|_| T::one()), arc(|_| T::zero()), arc(|_| T::zero()), x0, None)
    }

    /// `σ(x) = 2 + sin x, b(x) = cos x`.
    pub fn sine(x0: T) -> Self {
        Self::new(
            "sine",
            arc(|x: T| lit::<T>(2.0) + x.sin()),
            arc(|x: T| x.cos()),
            arc(|x: T| x.cos()),
            arc(|x: T| -x.sin()),
            arc(|x: T| -x.sin()),
            x0,
            None,
        )
    }

    /// `σ(x) = 2 + sin x, b = r σ`.
    pub fn proportional(r: T, x0: T) -> Self {
        Self::new(
            format!("proportional:{r}"),
            arc(|x: T| lit::<T>(2.0) + x.sin()),
            arc(move |x: T| r * (lit::<T>(2.0) + x.sin())),
            arc(|x: T| x.cos()),
            arc(move |x: T| r * x.cos()),
            arc(|x: T| -x.sin()),
            x0,
            Some(r),
        )
    }

    /// `σ(x) = sin x, b = r σ`; with `x0 = 0` the solution never moves.
    pub fn vanishing(r: T, x0: T) -> Self {
        Self::new(
            format!("vanishing:{r}"),
            arc(|x: T| x.sin()),
            arc(move |x: T| r * x.sin()),
            arc(|x: T| x.cos()),
            arc(move |x: T| r * x.cos()),
            arc(|x: T| -x.sin()),
            x0,
            Some(r),
        )
    }

    /// Ornstein-Uhlenbeck: `σ ≡ 1, b(x) = -θ x`.
    pub fn ou(theta: T, x0: T) -> Self {
        Self::new(
            format!("ou:{theta}"),
            arc(|_| T::one()),
            arc(move |x: T| -theta * x),
            arc(|_| T::zero()),
            arc(move |_| -theta),
            arc(|_| T::zero()),
            x0,
            None,
        )
    }

    /// Parses `constant`, `linear`, `sine`, `proportional:r`, `vanishing:r`, `ou:theta`.
    pub fn preset(spec: &str, x0: T) -> Result<Self> {
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        let num = |what: &'static str| -> Result<T> {
            arg.and_then(|a| a.trim().parse::<f64>().ok())
                .map(T::lit)
                .ok_or_else(|| invalid(what, format!("preset `{spec}` needs a numeric argument")))
        };
        match head {
            "constant" => Ok(Self::constant(x0)),
            "linear" => Ok(Self::linear(x0)),
            "sine" => Ok(Self::sine(x0)),
            "proportional" => Ok(Self::proportional(num("r")?, x0)),
            "vanishing" => Ok(Self::vanishing(num("r")?, x0)),
            "ou" => Ok(Self::ou(num("theta")?, x0)),
            _ => Err(invalid("preset", format!("unknown coefficient preset `{spec}`"))),
        }
    }

    /// Compares the supplied derivatives with centred differences at
    /// `points` random locations near `x0`, to relative `tol`.
    pub fn check_derivatives(&self, points: usize, tol: f64, seed: SeedSpec) -> Result<()> {
        let mut rng = seed.path_rng(u64::MAX - 1, 0);
        let eps = 1e-5;
        let pairs: [(&str, &ScalarFn<T>, &ScalarFn<T>); 3] = [
            ("sigma'", &self.sigma, &self.sigma_prime),
            ("b'", &self.b, &self.b_prime),
            ("sigma''", &self.sigma_prime, &self.sigma_second),
        ];
        for _ in 0..points {
            let x: f64 = self.x0.as_f64() + rng.random_range(-3.0..3.0);
            for (name, f, d) in pairs {
                let f64_of = |y: f64| f(T::lit(y)).as_f64();
                let fd = (f64_of(x + eps) - f64_of(x - eps)) / (2.0 * eps);
                let given = d(T::lit(x)).as_f64();
                if (fd - given).abs() > tol * given.abs().max(1.0) {
                    return Err(Error::Coefficients(format!(
                        "{name} at x={x}: supplied {given}, finite difference {fd}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ratio `r` when `b = r σ` was declared.
    pub fn ratio(&self) -> Option<T> {
        self.proportional
    }
}
