//! Drift formulas for diffusions: forward and backward drifts of Itô
//! diffusions, the proportional fractional case, and the correction term
//! `β` of the general present-derivative formula.

use std::sync::Arc;

use serde::Serialize;

use super::regress::{binned_regression, BinEstimate, BinRule};
use crate::error::{invalid, Error, Result};
use crate::frac::op_oh;
use crate::gaussian::PathEnsemble;
use crate::grid::{GridFunction, HurstIndex};
use crate::quad::{integrate, QuadConfig};
use crate::scalar::{lit, Real};
use crate::young::{CoefficientSet, ScalarFn, SolutionPath};

/// Marginal density `p_t` of a diffusion.
#[derive(Clone)]
pub enum DensityModel<T> {
    /// Normal with mean `m(t)` and variance `v(t) > 0`.
    Gaussian { mean: ScalarFn<T>, variance: ScalarFn<T> },
    /// Gaussian kernel estimate from samples of `X_t` at one fixed time.
    Kde { samples: Arc<Vec<T>>, bandwidth: T },
}

impl<T: Real> std::fmt::Debug for DensityModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Gaussian { .. } => f.write_str("Gaussian"),
            Self::Kde { samples, bandwidth } => write!(f, "Kde(n={}, bandwidth={bandwidth})", samples.len()),
        }
    }
}

impl<T: Real> DensityModel<T> {
    pub fn gaussian(mean: ScalarFn<T>, variance: ScalarFn<T>) -> Self {
        Self::Gaussian { mean, variance }
    }

    /// `x0 + W_t`.
    pub fn brownian(x0: T) -> Self {
        Self::gaussian(Arc::new(move |_| x0), Arc::new(|t| t))
    }

    /// `dX = -θX dt + dW`, `X_0 = x0`.
    pub fn ou(theta: T, x0: T) -> Result<Self> {
        if !(theta > T::zero()) {
            return Err(invalid("theta", "must be positive"));
        }
        Ok(Self::gaussian(
            Arc::new(move |t: T| x0 * (-theta * t).exp()),
            Arc::new(move |t: T| -(-(theta + theta) * t).exp_m1() / (theta + theta)),
        ))
    }

    /// Silverman's bandwidth `0.9 min(sd, IQR/1.34) n^{-1/5}` unless given.
    pub fn kde(samples: Vec<T>, bandwidth: Option<T>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("samples", "a kernel density needs at least two samples"));
        }
        let bandwidth = match bandwidth {
            Some(b) => b,
            None => silverman(&samples),
        };
        if !(bandwidth > T::zero()) {
            return Err(invalid("bandwidth", "must be positive"));
        }
        Ok(Self::Kde {
            samples: Arc::new(samples),
            bandwidth,
        })
    }

    /// `(p_t(x), ∂_x p_t(x))`.
    pub fn density_and_slope(&self, t: T, x: T) -> Result<(T, T)> {
        let norm = T::one() / (lit::<T>(2.0) * T::PI()).sqrt();
        match self {
            Self::Gaussian { mean, variance } => {
                let v = variance(t);
                if !(v > T::zero()) {
                    return Err(invalid("variance", format!("v_t must be positive, got {v} at t={t}")));
                }
                let z = (x - mean(t)) / v.sqrt();
                let p = norm * (-(z * z) * lit(0.5)).exp() / v.sqrt();
                Ok((p, -p * z / v.sqrt()))
            }
            Self::Kde { samples, bandwidth } => {
                let (mut p, mut dp) = (T::zero(), T::zero());
                for &s in samples.iter() {
                    let z = (x - s) / *bandwidth;
                    let k = (-(z * z) * lit(0.5)).exp();
                    p += k;
                    dp -= k * z;
                }
                let n = T::from_usize_lossy(samples.len());
                Ok((norm * p / (n * *bandwidth), norm * dp / (n * *bandwidth * *bandwidth)))
            }
        }
    }
}

fn silverman<T: Real>(x: &[T]) -> T {
    let n = T::from_usize_lossy(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    let sd = (x.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / (n - T::one())).sqrt();
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let q = |p: f64| s[((s.len() - 1) as f64 * p).round() as usize];
    let iqr = (q(0.75) - q(0.25)) / lit(1.34);
    let spread = if iqr > T::zero() { sd.min(iqr) } else { sd };
    lit::<T>(0.9) * spread * n.powf(lit(-0.2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WienerDrifts<T> {
    pub forward: T,
    pub backward: T,
}

/// Forward drift `b(x)` and backward drift `b - ∂_x(σ² p)/p` of
/// `dX = b(X)dt + σ(X)dW`; the density term is dropped where `p = 0`.
pub fn wiener_drifts<T: Real>(c: &CoefficientSet<T>, p: &DensityModel<T>, t: T, x: T) -> Result<WienerDrifts<T>> {
    let b = (c.b)(x);
    let (pd, dp) = p.density_and_slope(t, x)?;
    if pd == T::zero() {
        return Ok(WienerDrifts { forward: b, backward: b });
    }
    let s = (c.sigma)(x);
    let ds2 = lit::<T>(2.0) * s * (c.sigma_prime)(x);
    Ok(WienerDrifts {
        forward: b,
        backward: b - ds2 - s * s * dp / pd,
    })
}

fn require_proportional<T: Real>(c: &CoefficientSet<T>) -> Result<T> {
    c.ratio()
        .ok_or_else(|| Error::Coefficients(format!("`{}` is not proportional (b = r sigma)", c.name)))
}

/// `H σ(X_t) B_t / t + b(X_t)` for `b = r σ`; forward and backward coincide.
pub fn proportional_present_derivative<T: Real>(
    c: &CoefficientSet<T>,
    hurst: HurstIndex<T>,
    t: T,
    x_t: T,
    b_t: T,
) -> Result<T> {
    require_proportional(c)?;
    if !hurst.regular() {
        return Err(invalid("hurst", "the closed form needs H > 1/2"));
    }
    if !(t > T::zero()) {
        return Err(invalid("t", "must be positive"));
    }
    Ok(hurst.value() * (c.sigma)(x_t) * b_t / t + (c.b)(x_t))
}

/// `∫_{x0}^{x} dy / σ(y)`; requires an elliptic `σ`.
pub fn lamperti<T: Real>(c: &CoefficientSet<T>, x: T) -> Result<T> {
    if !c.elliptic {
        return Err(Error::Coefficients(format!("`{}`: sigma is not elliptic", c.name)));
    }
    let r = integrate(|y: T| T::one() / (c.sigma)(y), c.x0, x, QuadConfig::rel(1e-12));
    Ok(r.value)
}

/// Driver value recovered from the state in the proportional case:
/// `B_t = ∫_{x0}^{X_t} dy/σ - r t`.
pub fn proportional_driver<T: Real>(c: &CoefficientSet<T>, t: T, x_t: T) -> Result<T> {
    let r = require_proportional(c)?;
    Ok(lamperti(c, x_t)? - r * t)
}

/// `β_r(t) = O_H[u ↦ ∫_u^r g(X_s) ds 1_{u<r}](t)` with
/// `g = (b'σ - bσ')/σ`, sampled on the solution grid.
pub fn compute_beta<T: Real>(
    c: &CoefficientSet<T>,
    sol: &SolutionPath<T>,
    r: T,
    hurst: HurstIndex<T>,
) -> Result<GridFunction<T>> {
    if !c.elliptic {
        return Err(Error::Coefficients(format!(
            "`{}`: sigma is not elliptic, cannot divide by it",
            c.name
        )));
    }
    if !hurst.regular() {
        return Err(invalid("hurst", "needs H > 1/2"));
    }
    let x = sol.x_fn();
    if !(r >= x.start() && r <= x.end()) {
        return Err(invalid("r", format!("must lie in [{}, {}], got {r}", x.start(), x.end())));
    }
    let g = x.map(|_, v| {
        let s = (c.sigma)(v);
        ((c.b_prime)(v) * s - (c.b)(v) * (c.sigma_prime)(v)) / s
    })?;
    let cum = g.cumulative_integral()?;
    let total = cum.eval(r);
    let inner = cum.map(|u, v| if u < r { total - v } else { T::zero() })?;
    op_oh(&inner, hurst)
}

/// One conditioning bin of the reduced present-derivative formula.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedBin<T> {
    pub x: T,
    pub count: usize,
    /// `b(x) + Hσ(x)/t (∫_{x0}^x dy/σ - E[∫_0^t (b/σ)(X_s) ds | X_t = x])`
    pub value: T,
    pub se: T,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Eq23Outcome<T> {
    /// `β ≡ 0`, all terms evaluated.
    Evaluated { beta_sup: T, bins: Vec<ReducedBin<T>> },
    /// `β` is not identically zero: the Skorokhod integrals of `β` are not
    /// evaluated and no number is returned for the derivative.
    Unevaluated {
        beta_sup: T,
        unevaluated_term: String,
        /// The terms that do not involve `β`, per bin.
        partial: Vec<ReducedBin<T>>,
    },
}

/// Evaluates the present-derivative formula at `t` from an ensemble solved
/// on a fine grid. `β` is probed on the first path at `beta_probes` times
/// `r ∈ (0, t]`; above `beta_tol` the result is [`Eq23Outcome::Unevaluated`].
pub fn eq23_present_derivative<T: Real>(
    c: &CoefficientSet<T>,
    hurst: HurstIndex<T>,
    e: &PathEnsemble<T>,
    t: T,
    rule: BinRule,
    beta_probes: usize,
    beta_tol: T,
) -> Result<Eq23Outcome<T>> {
    if !(t > T::zero()) {
        return Err(invalid("t", "must be positive"));
    }
    let pts = e.grid().points();
    let k = pts
        .iter()
        .position(|s| (*s - t).abs() <= e.grid().horizon() * lit(1e-9))
        .ok_or_else(|| invalid("t", format!("{t} is not a node of the ensemble grid")))?;
    let sol = SolutionPath {
        grid: e.grid().clone(),
        x: e.path(0).to_vec(),
        driver: vec![T::zero(); pts.len()],
        a: None,
        flow_evaluations: 0,
        scheme: crate::young::Scheme::EulerYoung,
    };
    let mut beta_sup = T::zero();
    for i in 1..=beta_probes.max(1) {
        let r = t * T::from_usize_lossy(i) / T::from_usize_lossy(beta_probes.max(1));
        let beta = compute_beta(c, &sol, r, hurst)?;
        beta_sup = beta.samples()[..=k].iter().fold(beta_sup, |m, v| m.max(v.abs()));
    }
    let ratio = |v: T| (c.b)(v) / (c.sigma)(v);
    let n = e.n_paths();
    let mut xt = Vec::with_capacity(n);
    let mut integral = Vec::with_capacity(n);
    for j in 0..n {
        let p = e.path(j);
        let mut acc = T::zero();
        for i in 0..k {
            acc += (ratio(p[i]) + ratio(p[i + 1])) * lit(0.5) * (pts[i + 1] - pts[i]);
        }
        xt.push(p[k]);
        integral.push(acc);
    }
    let bins: Vec<BinEstimate<T>> = binned_regression(&xt, &integral, rule);
    let h = hurst.value();
    let reduced = bins
        .iter()
        .map(|b| {
            let s = (c.sigma)(b.center);
            let scale = h * s / t;
            Ok(ReducedBin {
                x: b.center,
                count: b.count,
                value: (c.b)(b.center) + scale * (lamperti(c, b.center)? - b.estimate),
                se: scale.abs() * b.se,
                excluded: b.excluded,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if beta_sup <= beta_tol {
        Ok(Eq23Outcome::Evaluated { beta_sup, bins: reduced })
    } else {
        Ok(Eq23Outcome::Unevaluated {
            beta_sup,
            unevaluated_term: "Skorokhod integrals of beta against B".into(),
            partial: reduced,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::young::doss_sussmann_solve;

    fn hurst(h: f64) -> HurstIndex<f64> {
        HurstIndex::new(h).unwrap()
    }

    #[test]
    fn brownian_and_ou_drifts() {
        let bm = CoefficientSet::<f64>::constant(0.0);
        let d = wiener_drifts(&bm, &DensityModel::brownian(0.0), 0.5, 0.3).unwrap();
        assert_eq!(d.forward, 0.0);
        assert!((d.backward - 0.6).abs() < 1e-14);
        let ou = CoefficientSet::ou(1.0, 1.0);
        let p = DensityModel::ou(1.0, 1.0).unwrap();
        let t: f64 = 0.5;
        let (m, v) = ((-t).exp(), (1.0 - (-2.0 * t).exp()) / 2.0);
        let d = wiener_drifts(&ou, &p, t, 0.2).unwrap();
        assert!((d.forward + 0.2).abs() < 1e-15);
        assert!((d.backward - (-0.2 + (0.2 - m) / v)).abs() < 1e-12);
    }

    #[test]
    fn zero_density_keeps_the_forward_drift() {
        let ou = CoefficientSet::ou(1.0, 0.0);
        let d = wiener_drifts(&ou, &DensityModel::brownian(0.0), 1e-4, 50.0).unwrap();
        assert_eq!(d.backward, d.forward);
    }

    #[test]
    fn kde_tracks_a_gaussian() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let normal = Normal::standard();
        let samples: Vec<f64> = (1..2000)
            .map(|i| normal.inverse_cdf(i as f64 / 2000.0))
            .collect();
        let k = DensityModel::kde(samples, None).unwrap();
        let (p, dp) = k.density_and_slope(0.0, 0.5).unwrap();
        let exact = (-0.125f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((p - exact).abs() < 0.02, "{p} vs {exact}");
        assert!((dp + 0.5 * exact).abs() < 0.03);
    }

    #[test]
    fn proportional_closed_form_cases() {
        let c = CoefficientSet::proportional(0.5, 0.0);
        let v = proportional_present_derivative(&c, hurst(0.7), 1.0, 0.0, 1.0).unwrap();
        assert!((v - (0.7 * 2.0 + 1.0)).abs() < 1e-14);
        assert!(proportional_present_derivative(&CoefficientSet::sine(0.0), hurst(0.7), 1.0, 0.0, 1.0).is_err());
        assert!(proportional_present_derivative(&c, hurst(0.5), 1.0, 0.0, 1.0).is_err());
        let z = CoefficientSet::vanishing(0.5, 0.0);
        assert_eq!(proportional_present_derivative(&z, hurst(0.7), 1.0, 0.0, 0.8).unwrap(), 0.0);
    }

    #[test]
    fn beta_vanishes_for_proportional_and_at_r_zero() {
        let grid = TimeGrid::<f64>::uniform(1.0, 256).unwrap();
        let b: Vec<f64> = grid.points().iter().map(|t: &f64| (3.0 * t).sin() * 0.4).collect();
        let c = CoefficientSet::proportional(0.5, 0.2);
        let sol = doss_sussmann_solve(&c, &grid, &b).unwrap();
        for r in [0.0, 0.3, 1.0] {
            let beta = compute_beta(&c, &sol, r, hurst(0.7)).unwrap();
            assert!(beta.samples().iter().all(|v| v.abs() <= 1e-10));
        }
        let s = CoefficientSet::sine(0.2);
        let sol = doss_sussmann_solve(&s, &grid, &b).unwrap();
        let beta = compute_beta(&s, &sol, 0.0, hurst(0.7)).unwrap();
        assert!(beta.samples().iter().all(|v| *v == 0.0));
        assert!(compute_beta(&CoefficientSet::linear(1.0), &sol, 0.5, hurst(0.7)).is_err());
    }
}
