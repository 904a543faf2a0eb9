//! Exact Gaussian conditional increments and the closed-form derivatives of fBm.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::fbm_covariance;
use crate::grid::HurstIndex;
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::{lit, Real};

/// Which difference quotient is conditioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `(Z_{t+h} - Z_t)/h`
    Forward,
    /// `(Z_t - Z_{t-h})/h`
    Backward,
    /// `(Z_{t+h} - Z_{t-h})/(2h)`
    Symmetric,
}

impl Direction {
    /// `(coefficient, time)` pairs of the quotient.
    pub fn stencil<T: Real>(self, t: T, h: T) -> [(T, T); 2] {
        match self {
            Self::Forward => [(T::one() / h, t + h), (-T::one() / h, t)],
            Self::Backward => [(T::one() / h, t), (-T::one() / h, t - h)],
            Self::Symmetric => {
                let w = T::one() / (h + h);
                [(w, t + h), (-w, t - h)]
            }
        }
    }

    pub fn needs_past(self) -> bool {
        !matches!(self, Self::Forward)
    }
}

/// Regression of a difference quotient on conditioning values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalIncrement<T> {
    /// `M^{-1} v`, one coefficient per conditioning time.
    pub coefficients: Vec<T>,
    /// `Var(E[Δ | cond]) = vᵀ M^{-1} v`.
    pub variance: T,
    /// `det M`.
    pub determinant: T,
}

/// Regression of `Δ_h Z_t` on `(Z_s)_{s ∈ cond}` for a centred Gaussian
/// process with covariance `cov`.
pub fn conditional_increment_with<T: Real>(
    cov: impl Fn(T, T) -> Result<T>,
    t: T,
    h: T,
    direction: Direction,
    cond_times: &[T],
) -> Result<ConditionalIncrement<T>> {
    if !(h > T::zero()) {
        return Err(invalid("h", "step must be positive"));
    }
    if cond_times.is_empty() {
        return Err(invalid("cond_times", "need at least one conditioning time"));
    }
    let stencil = direction.stencil(t, h);
    if stencil.iter().any(|(_, s)| *s < T::zero()) {
        return Err(invalid("h", format!("t - h < 0 for t={t}, h={h}")));
    }
    let k = cond_times.len();
    let m = Matrix::from_fn(k, |i, j| cov(cond_times[i], cond_times[j]).unwrap_or_else(|_| T::nan()));
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(invalid("cond_times", "conditioning times must be nonnegative"));
    }
    let v = cond_times
        .iter()
        .map(|&s| {
            let mut acc = T::zero();
            for (w, u) in stencil {
                acc += w * cov(u, s)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<T>>>()?;
    let chol = Cholesky::factor(&m).map_err(|_| Error::Singular("conditioning covariance (duplicate or zero times)"))?;
    let coefficients = chol.solve(&v);
    let variance = coefficients.iter().zip(&v).map(|(a, b)| *a * *b).sum();
    let determinant = (0..k).map(|i| chol.lower.get(i, i)).fold(T::one(), |a, d| a * d * d);
    Ok(ConditionalIncrement {
        coefficients,
        variance,
        determinant,
    })
}

/// Exact regression of `Δ_h B_t` on fBm values at `cond_times` from the
/// covariance `R_H`.
pub fn gaussian_conditional_increment<T: Real>(
    hurst: HurstIndex<T>,
    t: T,
    h: T,
    direction: Direction,
    cond_times: &[T],
) -> Result<ConditionalIncrement<T>> {
    conditional_increment_with(|a, b| fbm_covariance(hurst, a, b), t, h, direction, cond_times)
}

/// `Var(E[(B_t - B_{t-h})/h | B_t, B_{t+h}])` and `det M_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackwardVariance<T> {
    pub variance: T,
    pub determinant: T,
}

pub fn backward_variance_exact<T: Real>(hurst: HurstIndex<T>, t: T, h: T) -> Result<BackwardVariance<T>> {
    if !(h > T::zero() && h < t) {
        return Err(invalid("h", format!("need 0 < h < t, got h={h}, t={t}")));
    }
    let r = gaussian_conditional_increment(hurst, t, h, Direction::Backward, &[t, t + h])?;
    Ok(BackwardVariance {
        variance: r.variance,
        determinant: r.determinant,
    })
}

/// `((t+h)^{2H} - t^{2H} - h^{2H}) / (2h t^{2H})`, the forward regression
/// coefficient of fBm on its present value.
pub fn fbm_forward_coefficient<T: Real>(hurst: HurstIndex<T>, t: T, h: T) -> T {
    let two_h = lit::<T>(2.0) * hurst.value();
    let x = h / t;
    // (1+x)^{2H} - 1 without cancellation
    let lead = (two_h * x.ln_1p()).exp_m1();
    (lead - x.powf(two_h)) / (lit::<T>(2.0) * h)
}

/// Outcome of a closed-form derivative that may not exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Analytic<T> {
    Value(T),
    DoesNotExist,
}

impl<T: Copy> Analytic<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Self::Value(v) => Some(v),
            Self::DoesNotExist => None,
        }
    }
}

/// Present-σ-field derivative of fBm given `B_t`: `H B_t / t` for `H > 1/2`,
/// `0` forward and `B_t/t` backward for `H = 1/2`, nonexistent for `H < 1/2`.
/// The symmetric quotient averages the two one-sided limits.
pub fn analytic_fbm_present<T: Real>(hurst: HurstIndex<T>, t: T, b_t: T, direction: Direction) -> Result<Analytic<T>> {
    if !(t > T::zero()) {
        return Err(invalid("t", "must be positive"));
    }
    let h = hurst.value();
    if hurst.regular() {
        return Ok(Analytic::Value(h * b_t / t));
    }
    if !hurst.is_brownian() {
        return Ok(Analytic::DoesNotExist);
    }
    Ok(Analytic::Value(match direction {
        Direction::Forward => T::zero(),
        Direction::Backward => b_t / t,
        Direction::Symmetric => b_t / (t + t),
    }))
}
