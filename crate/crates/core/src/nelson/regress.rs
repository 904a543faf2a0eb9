//! Conditioning information and Monte Carlo regression of difference
//! quotients on it.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::exact::Direction;
use crate::error::{invalid, Error, Result};
use crate::gaussian::PathEnsemble;
use crate::linalg::weighted_least_squares;
use crate::scalar::{lit, Real};

pub type PathFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// The conditioning σ-field `Q`, realised through finitely many path values.
#[derive(Clone)]
pub enum SigmaFieldSpec<T> {
    /// `σ(Z_t)`
    Present { t: T },
    /// `σ(Z_s : s ∈ times)`, all `s ≤ t`
    Past { t: T, times: Vec<T> },
    /// `σ(Z_s : s ∈ times)`, all `s ≥ t`
    Future { t: T, times: Vec<T> },
    /// `σ(g(Z_{s_1}, …, Z_{s_k}))` with `g` valued in `R^dim`
    Function {
        t: T,
        inputs: Vec<T>,
        dim: usize,
        eval: PathFn<T>,
        label: String,
    },
}

impl<T: Real> fmt::Debug for SigmaFieldSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl<T: Real> SigmaFieldSpec<T> {
    pub fn present(t: T) -> Self {
        Self::Present { t }
    }

    pub fn past(t: T, times: Vec<T>) -> Result<Self> {
        let s = Self::Past { t, times };
        s.validate()?;
        Ok(s)
    }

    pub fn future(t: T, times: Vec<T>) -> Result<Self> {
        let s = Self::Future { t, times };
        s.validate()?;
        Ok(s)
    }

    /// `σ(Z_t²)`, an even function of the present value.
    pub fn even(t: T) -> Self {
        Self::Function {
            t,
            inputs: vec![t],
            dim: 1,
            eval: Arc::new(|z: &[T]| vec![z[0] * z[0]]),
            label: "Z_t^2".into(),
        }
    }

    pub fn function(t: T, inputs: Vec<T>, dim: usize, label: impl Into<String>, eval: PathFn<T>) -> Result<Self> {
        let s = Self::Function {
            t,
            inputs,
            dim,
            eval,
            label: label.into(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn anchor(&self) -> T {
        match self {
            Self::Present { t } | Self::Past { t, .. } | Self::Future { t, .. } | Self::Function { t, .. } => *t,
        }
    }

    /// Path coordinates the conditioning values are computed from.
    pub fn conditioning_times(&self) -> Vec<T> {
        match self {
            Self::Present { t } => vec![*t],
            Self::Past { times, .. } | Self::Future { times, .. } => times.clone(),
            Self::Function { inputs, .. } => inputs.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Present { .. } => 1,
            Self::Past { times, .. } | Self::Future { times, .. } => times.len(),
            Self::Function { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Present { .. } => Ok(()),
            Self::Past { t, times } => {
                if times.is_empty() || times.iter().any(|s| *s > *t) {
                    return Err(invalid("sigma_field", "past needs at least one time, all <= t"));
                }
                Ok(())
            }
            Self::Future { t, times } => {
                if times.is_empty() || times.iter().any(|s| *s < *t) {
                    return Err(invalid("sigma_field", "future needs at least one time, all >= t"));
                }
                Ok(())
            }
            Self::Function { inputs, dim, .. } => {
                if inputs.is_empty() || *dim == 0 {
                    return Err(invalid("sigma_field", "function of the path needs inputs and a positive dimension"));
                }
                Ok(())
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Present { t } => format!("present(t={t})"),
            Self::Past { t, times } => format!("past(t={t}, {} times)", times.len()),
            Self::Future { t, times } => format!("future(t={t}, {} times)", times.len()),
            Self::Function { t, label, .. } => format!("function(t={t}, {label})"),
        }
    }

    fn values(&self, raw: &[T]) -> Vec<T> {
        match self {
            Self::Function { eval, .. } => eval(raw),
            _ => raw.to_vec(),
        }
    }
}

/// A σ-field family indexed by the ladder step: past and future grow with
/// `h` shrinking, as `{t ∓ j h : j < k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "k")]
pub enum SigmaFieldPlan {
    Present,
    Past(usize),
    Future(usize),
    Even,
}

impl SigmaFieldPlan {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || invalid("sigma_field", format!("expected present | past:k | future:k | even, got `{s}`"));
        let count = |v: &str| v.parse::<usize>().ok().filter(|k| *k > 0).ok_or_else(bad);
        match s.split_once(':') {
            None if s == "present" => Ok(Self::Present),
            None if s == "even" => Ok(Self::Even),
            Some(("past", k)) => Ok(Self::Past(count(k)?)),
            Some(("future", k)) => Ok(Self::Future(count(k)?)),
            _ => Err(bad()),
        }
    }

    pub fn resolve<T: Real>(self, t: T, h: T) -> Result<SigmaFieldSpec<T>> {
        match self {
            Self::Present => Ok(SigmaFieldSpec::present(t)),
            Self::Even => Ok(SigmaFieldSpec::even(t)),
            Self::Past(k) => SigmaFieldSpec::past(t, (0..k).map(|j| t - h * T::from_usize_lossy(j)).collect()),
            Self::Future(k) => SigmaFieldSpec::future(t, (0..k).map(|j| t + h * T::from_usize_lossy(j)).collect()),
        }
    }

    /// Whether the conditioning is the same for every ladder step.
    pub fn is_fixed(self) -> bool {
        matches!(self, Self::Present | Self::Even)
    }
}

impl fmt::Display for SigmaFieldPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Present => f.write_str("present"),
            Self::Even => f.write_str("even"),
            Self::Past(k) => write!(f, "past:{k}"),
            Self::Future(k) => write!(f, "future:{k}"),
        }
    }
}

/// One bin of a binned regression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinEstimate<T> {
    /// Mean conditioning value inside the bin.
    pub center: T,
    pub lo: T,
    pub hi: T,
    pub count: usize,
    pub estimate: T,
    pub se: T,
    /// Fewer than the minimum count; left out of every verdict.
    pub excluded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionMethod {
    Binned,
    Linear,
}

/// `E[Y | Q]` estimated from paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalEstimate<T> {
    pub method: RegressionMethod,
    /// Binned method only.
    pub bins: Vec<BinEstimate<T>>,
    /// Intercept then one slope per conditioning coordinate.
    pub coefficients: Vec<T>,
    pub coefficient_se: Vec<T>,
    /// `Var(E[Y|Q])` with the sampling-noise bias removed.
    pub variance: T,
    /// `Var(Y)`.
    pub response_variance: T,
    /// Between-group chi-square statistic against a constant `E[Y|Q]`.
    pub degeneracy_statistic: T,
    pub degrees_of_freedom: usize,
    /// `Var(E[Y|Q]) > 0` at the 95% level.
    pub nondegenerate: bool,
    pub n_paths: usize,
}

/// Upper 95% point of the chi-square law.
pub fn chi2_95(dof: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if dof == 0 {
        return 0.0;
    }
    ChiSquared::new(dof as f64).map(|d| d.inverse_cdf(0.95)).unwrap_or(f64::INFINITY)
}

fn mean_var<T: Real>(y: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(y.len());
    let m = y.iter().copied().sum::<T>() / n;
    let v = if y.len() > 1 {
        y.iter().map(|v| (*v - m) * (*v - m)).sum::<T>() / (n - T::one())
    } else {
        T::zero()
    };
    (m, v)
}

/// Binning rule: width `factor · M^{-1/5} · sd(x)`, bins under `min_count`
/// excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRule {
    pub bandwidth_factor: f64,
    pub min_count: usize,
}

impl Default for BinRule {
    fn default() -> Self {
        Self {
            bandwidth_factor: 1.0,
            min_count: 30,
        }
    }
}

/// Binned regression of `y` on the scalar `x`.
pub fn binned_regression<T: Real>(x: &[T], y: &[T], rule: BinRule) -> Vec<BinEstimate<T>> {
    let n = x.len();
    let (_, vx) = mean_var(x);
    let sd = vx.sqrt();
    let lo = x.iter().copied().fold(T::infinity(), T::min);
    let hi = x.iter().copied().fold(T::neg_infinity(), T::max);
    let width = lit::<T>(rule.bandwidth_factor) * T::from_usize_lossy(n).powf(lit(-0.2)) * sd;
    let n_bins = if width > T::zero() && hi > lo {
        (((hi - lo) / width).floor().as_f64() as usize + 1).min(n)
    } else {
        1
    };
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (j, &v) in x.iter().enumerate() {
        let b = if n_bins == 1 {
            0
        } else {
            (((v - lo) / width).floor().as_f64() as usize).min(n_bins - 1)
        };
        groups[b].push(j);
    }
    groups
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(b, g)| {
            let xs: Vec<T> = g.iter().map(|&j| x[j]).collect();
            let ys: Vec<T> = g.iter().map(|&j| y[j]).collect();
            let (cx, _) = mean_var(&xs);
            let (m, v) = mean_var(&ys);
            let blo = if n_bins == 1 { lo } else { lo + width * T::from_usize_lossy(b) };
            BinEstimate {
                center: cx,
                lo: blo,
                hi: if n_bins == 1 { hi } else { blo + width },
                count: g.len(),
                estimate: m,
                se: (v / T::from_usize_lossy(g.len())).sqrt(),
                excluded: g.len() < rule.min_count,
            }
        })
        .collect()
}

/// Ordinary least squares of `y` on `(1, x_1, …, x_k)`; returns the
/// coefficients, their standard errors, fitted values and residual variance.
pub fn linear_regression<T: Real>(xs: &[Vec<T>], y: &[T]) -> Result<(Vec<T>, Vec<T>, Vec<T>, T)> {
    let n = y.len();
    let k = xs.first().map(|r| r.len()).unwrap_or(0);
    if n <= k + 1 {
        return Err(invalid("n_paths", format!("{n} paths cannot fit {} coefficients", k + 1)));
    }
    // centre the regressors for conditioning
    let means: Vec<T> = (0..k)
        .map(|c| xs.iter().map(|r| r[c]).sum::<T>() / T::from_usize_lossy(n))
        .collect();
    let design: Vec<Vec<T>> = xs
        .iter()
        .map(|r| std::iter::once(T::one()).chain(r.iter().zip(&means).map(|(v, m)| *v - *m)).collect())
        .collect();
    let ones = vec![T::one(); n];
    let (beta, inv) = weighted_least_squares(&design, y, &ones)?;
    let fitted: Vec<T> = design.iter().map(|r| r.iter().zip(&beta).map(|(a, b)| *a * *b).sum()).collect();
    let rss: T = fitted.iter().zip(y).map(|(f, v)| (*v - *f) * (*v - *f)).sum();
    let s2 = rss / T::from_usize_lossy(n - k - 1);
    let se: Vec<T> = (0..=k).map(|i| (inv.get(i, i) * s2).sqrt()).collect();
    // back to uncentred intercept
    let mut coef = beta.clone();
    coef[0] = beta[0] - (0..k).map(|c| beta[c + 1] * means[c]).sum::<T>();
    Ok((coef, se, fitted, s2))
}

/// The scalar or vector conditioning values of every path.
#[derive(Debug, Clone)]
pub(crate) enum Conditioning<T> {
    Scalar(Vec<T>),
    Vector(Vec<Vec<T>>),
}

pub(crate) fn estimate_from<T: Real>(cond: &Conditioning<T>, y: &[T], rule: BinRule) -> Result<ConditionalEstimate<T>> {
    let n = y.len();
    let (_, vy) = mean_var(y);
    match cond {
        Conditioning::Scalar(x) => {
            let bins = binned_regression(x, y, rule);
            let kept: Vec<&BinEstimate<T>> = bins.iter().filter(|b| !b.excluded).collect();
            let total = T::from_usize_lossy(kept.iter().map(|b| b.count).sum::<usize>());
            let (mut variance, mut q) = (T::zero(), T::zero());
            if total > T::zero() {
                let w = |b: &BinEstimate<T>| T::from_usize_lossy(b.count) / total;
                let mbar: T = kept.iter().map(|b| w(b) * b.estimate).sum();
                variance = kept
                    .iter()
                    .map(|b| w(b) * ((b.estimate - mbar) * (b.estimate - mbar) - b.se * b.se))
                    .sum::<T>()
                    .max(T::zero());
                q = chi_square(kept.iter().map(|b| (b.estimate, b.se)));
            }
            let dof = kept.len().saturating_sub(1);
            let (coefficients, coefficient_se) = if x.iter().any(|v| *v != x[0]) {
                let rows: Vec<Vec<T>> = x.iter().map(|v| vec![*v]).collect();
                let (c, s, _, _) = linear_regression(&rows, y)?;
                (c, s)
            } else {
                let (m, v) = mean_var(y);
                (vec![m], vec![(v / T::from_usize_lossy(n)).sqrt()])
            };
            Ok(ConditionalEstimate {
                method: RegressionMethod::Binned,
                bins,
                coefficients,
                coefficient_se,
                variance,
                response_variance: vy,
                degeneracy_statistic: q,
                degrees_of_freedom: dof,
                nondegenerate: dof > 0 && q.as_f64() > chi2_95(dof),
                n_paths: n,
            })
        }
        Conditioning::Vector(xs) => {
            let k = xs.first().map(|r| r.len()).unwrap_or(0);
            let (coefficients, coefficient_se, fitted, s2) = linear_regression(xs, y)?;
            let (_, vf) = mean_var(&fitted);
            let variance = (vf - T::from_usize_lossy(k) * s2 / T::from_usize_lossy(n)).max(T::zero());
            let ss_model = vf * T::from_usize_lossy(n - 1);
            let q = if s2 > T::zero() {
                ss_model / s2
            } else if ss_model > T::zero() {
                T::infinity()
            } else {
                T::zero()
            };
            Ok(ConditionalEstimate {
                method: RegressionMethod::Linear,
                bins: Vec::new(),
                coefficients,
                coefficient_se,
                variance,
                response_variance: vy,
                degeneracy_statistic: q,
                degrees_of_freedom: k,
                nondegenerate: k > 0 && q.as_f64() > chi2_95(k),
                n_paths: n,
            })
        }
    }
}

// Σ (m_b - m̃)²/se_b² around the precision-weighted mean; exact zero spread
// with zero standard errors counts as no evidence.
fn chi_square<T: Real>(groups: impl Iterator<Item = (T, T)> + Clone) -> T {
    let spread = {
        let (lo, hi) = groups
            .clone()
            .fold((T::infinity(), T::neg_infinity()), |(a, b), (m, _)| (a.min(m), b.max(m)));
        hi - lo
    };
    if !(spread > T::zero()) {
        return T::zero();
    }
    if groups.clone().any(|(_, s)| !(s > T::zero())) {
        return T::infinity();
    }
    let (sw, swm) = groups.clone().fold((T::zero(), T::zero()), |(a, b), (m, s)| {
        let w = T::one() / (s * s);
        (a + w, b + w * m)
    });
    let mt = swm / sw;
    groups.map(|(m, s)| (m - mt) * (m - mt) / (s * s)).sum()
}

// Exact-match lookup of a time among the ensemble nodes.
pub(crate) fn node<T: Real>(e: &PathEnsemble<T>, t: T) -> Result<usize> {
    let p = e.grid().points();
    let tol = e.grid().horizon() * lit(1e-9);
    let pos = p.partition_point(|v| *v < t - tol);
    if pos < p.len() && (p[pos] - t).abs() <= tol {
        Ok(pos)
    } else {
        Err(invalid("time", format!("{t} is not a node of the ensemble grid")))
    }
}

/// Per-path difference quotients `Δ_h Z_t` (or its backward/symmetric version).
pub fn increments<T: Real>(e: &PathEnsemble<T>, t: T, h: T, direction: Direction) -> Result<Vec<T>> {
    let [(w1, s1), (w2, s2)] = direction.stencil(t, h);
    let (i1, i2) = (node(e, s1)?, node(e, s2)?);
    Ok((0..e.n_paths()).map(|j| w1 * e.value(j, i1) + w2 * e.value(j, i2)).collect())
}

pub(crate) fn conditioning<T: Real>(e: &PathEnsemble<T>, spec: &SigmaFieldSpec<T>) -> Result<Conditioning<T>> {
    spec.validate()?;
    let idx = spec
        .conditioning_times()
        .iter()
        .map(|&s| node(e, s))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<T>> = (0..e.n_paths())
        .map(|j| {
            let raw: Vec<T> = idx.iter().map(|&i| e.value(j, i)).collect();
            spec.values(&raw)
        })
        .collect();
    if rows.iter().any(|r| r.len() != spec.dim()) {
        return Err(invalid("sigma_field", "conditioning function returned the wrong dimension"));
    }
    Ok(if spec.dim() == 1 {
        Conditioning::Scalar(rows.into_iter().map(|r| r[0]).collect())
    } else {
        Conditioning::Vector(rows)
    })
}

/// Monte Carlo `E[Δ_h Z_t | Q]`: binned regression for scalar conditioning,
/// linear regression on the listed coordinates otherwise.
pub fn regress_conditional<T: Real>(
    e: &PathEnsemble<T>,
    t: T,
    h: T,
    direction: Direction,
    spec: &SigmaFieldSpec<T>,
) -> Result<ConditionalEstimate<T>> {
    regress_conditional_with(e, t, h, direction, spec, BinRule::default())
}

pub fn regress_conditional_with<T: Real>(
    e: &PathEnsemble<T>,
    t: T,
    h: T,
    direction: Direction,
    spec: &SigmaFieldSpec<T>,
    rule: BinRule,
) -> Result<ConditionalEstimate<T>> {
    if e.n_paths() < 2 {
        return Err(invalid("n_paths", "regression needs at least two paths"));
    }
    let y = increments(e, t, h, direction)?;
    let cond = conditioning(e, spec)?;
    estimate_from(&cond, &y, rule)
}

/// Weighted polynomial fit (weights `1/se²`, or counts when an error is zero)
/// of the retained bin estimates against the bin centres; lowest order first.
pub fn fit_value_model<T: Real>(bins: &[BinEstimate<T>], degree: usize) -> Result<Vec<T>> {
    let kept: Vec<&BinEstimate<T>> = bins.iter().filter(|b| !b.excluded).collect();
    if kept.is_empty() {
        return Err(Error::Singular("value model (no retained bins)"));
    }
    let degree = degree.min(kept.len() - 1);
    let any_zero = kept.iter().any(|b| !(b.se > T::zero()));
    let design: Vec<Vec<T>> = kept
        .iter()
        .map(|b| (0..=degree).map(|p| b.center.powi(p as i32)).collect())
        .collect();
    let y: Vec<T> = kept.iter().map(|b| b.estimate).collect();
    let w: Vec<T> = kept
        .iter()
        .map(|b| if any_zero { T::from_usize_lossy(b.count) } else { T::one() / (b.se * b.se) })
        .collect();
    Ok(weighted_least_squares(&design, &y, &w)?.0)
}

/// Local polynomial smoother of the retained bin estimates, evaluated at
/// every bin centre. Gaussian weights of width `bandwidth` times the
/// precision of each bin.
pub fn local_polynomial<T: Real>(bins: &[BinEstimate<T>], bandwidth: T, degree: usize) -> Result<Vec<T>> {
    let kept: Vec<&BinEstimate<T>> = bins.iter().filter(|b| !b.excluded).collect();
    if kept.is_empty() {
        return Err(Error::Singular("local smoother (no retained bins)"));
    }
    if !(bandwidth > T::zero()) {
        return Err(invalid("bandwidth", "must be positive"));
    }
    let degree = degree.min(kept.len() - 1);
    let any_zero = kept.iter().any(|b| !(b.se > T::zero()));
    let precision = |b: &BinEstimate<T>| {
        if any_zero {
            T::from_usize_lossy(b.count)
        } else {
            T::one() / (b.se * b.se)
        }
    };
    bins.iter()
        .map(|at| {
            let x0 = at.center;
            let design: Vec<Vec<T>> = kept
                .iter()
                .map(|b| {
                    let d = (b.center - x0) / bandwidth;
                    (0..=degree).map(|p| d.powi(p as i32)).collect()
                })
                .collect();
            let y: Vec<T> = kept.iter().map(|b| b.estimate).collect();
            let w: Vec<T> = kept
                .iter()
                .map(|b| {
                    let d = (b.center - x0) / bandwidth;
                    precision(b) * (-(d * d) * lit(0.5)).exp()
                })
                .collect();
            let (mut d, mut yy, mut ww) = (Vec::new(), Vec::new(), Vec::new());
            for ((row, v), wi) in design.into_iter().zip(y).zip(w) {
                if wi > T::zero() {
                    d.push(row);
                    yy.push(v);
                    ww.push(wi);
                }
            }
            // drop the degree where the window holds too little information
            let mut deg = degree.min(d.len().saturating_sub(1));
            loop {
                let dd: Vec<Vec<T>> = d.iter().map(|r| r[..=deg].to_vec()).collect();
                match weighted_least_squares(&dd, &yy, &ww) {
                    Ok((beta, _)) => return Ok(beta[0]),
                    Err(e) if deg == 0 => return Err(e),
                    Err(_) => deg -= 1,
                }
            }
        })
        .collect()
}

pub fn eval_poly<T: Real>(coef: &[T], x: T) -> T {
    coef.iter().rev().fold(T::zero(), |acc, c| acc * x + *c)
}

/// `sqrt(Σ n_b (m(x_b) - f(x_b))² / Σ n_b f(x_b)²)` over retained bins.
pub fn relative_l2<T: Real>(bins: &[BinEstimate<T>], model: impl Fn(T) -> T, truth: impl Fn(T) -> T) -> T {
    let (mut num, mut den) = (T::zero(), T::zero());
    for b in bins.iter().filter(|b| !b.excluded) {
        let w = T::from_usize_lossy(b.count);
        let f = truth(b.center);
        let d = model(b.center) - f;
        num += w * d * d;
        den += w * f * f;
    }
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    #[test]
    fn plan_parsing_and_resolution() {
        assert_eq!(SigmaFieldPlan::parse("past:8").unwrap(), SigmaFieldPlan::Past(8));
        assert_eq!(SigmaFieldPlan::parse("even").unwrap(), SigmaFieldPlan::Even);
        assert!(SigmaFieldPlan::parse("past:0").is_err());
        assert!(SigmaFieldPlan::parse("sideways").is_err());
        let s = SigmaFieldPlan::Past(3).resolve(1.0, 0.1).unwrap();
        assert_eq!(s.conditioning_times().len(), 3);
        assert!(SigmaFieldSpec::past(1.0, vec![1.5]).is_err());
        assert!(SigmaFieldSpec::future(1.0, vec![]).is_err());
    }

    #[test]
    fn deterministic_process_gives_constant_degenerate_estimate() {
        let grid = TimeGrid::from_points(vec![0.0, 0.9, 1.0, 1.1]).unwrap();
        let row: Vec<f64> = grid.points().iter().map(|t| t * t).collect();
        let values: Vec<f64> = (0..50).flat_map(|_| row.clone()).collect();
        let e = PathEnsemble::new(grid, 50, values, None, "t^2").unwrap();
        let r = regress_conditional(&e, 1.0, 0.1, Direction::Forward, &SigmaFieldSpec::present(1.0)).unwrap();
        assert_eq!(r.bins.len(), 1);
        assert!((r.bins[0].estimate - 2.1).abs() < 1e-12);
        assert!(!r.nondegenerate);
        assert_eq!(r.variance, 0.0);
    }

    #[test]
    fn linear_regression_recovers_coefficients() {
        let xs: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, ((i * 7) % 13) as f64]).collect();
        let y: Vec<f64> = xs.iter().map(|r| 1.0 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let (c, _, _, s2) = linear_regression(&xs, &y).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-9 && (c[1] - 2.0).abs() < 1e-9 && (c[2] + 0.5).abs() < 1e-9);
        assert!(s2 < 1e-18);
    }

    #[test]
    fn chi_square_quantile() {
        assert!((chi2_95(1) - 3.841).abs() < 0.05);
        assert!((chi2_95(10) - 18.307).abs() < 0.05);
    }

    #[test]
    fn polynomial_model() {
        let bins: Vec<BinEstimate<f64>> = (0..10)
            .map(|i| {
                let x = i as f64 / 3.0;
                BinEstimate { center: x, lo: x, hi: x, count: 100, estimate: 1.0 - x + 0.5 * x * x, se: 0.1, excluded: false }
            })
            .collect();
        let m = fit_value_model(&bins, 3).unwrap();
        assert!((eval_poly(&m, 2.0) - 1.0).abs() < 1e-9);
        assert!(relative_l2(&bins, |x| eval_poly(&m, x), |x| 1.0 - x + 0.5 * x * x) < 1e-9);
    }
}
