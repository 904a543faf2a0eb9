//! Ladder-based estimation and classification of stochastic derivatives.

use serde::{Deserialize, Serialize};

use super::exact::Direction;
use super::regress::{
    conditioning, estimate_from, increments, local_polynomial, node, BinRule, ConditionalEstimate, Conditioning,
    SigmaFieldPlan, SigmaFieldSpec,
};
use crate::error::{invalid, Error, Result};
use crate::frac::KernelSpec;
use crate::gaussian::{cholesky_sample, volterra_sample_at, PathEnsemble};
use crate::grid::{HurstIndex, TimeGrid};
use crate::linalg::weighted_least_squares;
use crate::rng::SeedSpec;
use crate::scalar::{lit, Real};
use crate::young::{proportional_ensemble, sde_ensemble, wiener_ensemble, CoefficientSet, Scheme, ScalarFn};

/// Steps `h₁ > h₂ > … > h_m > 0` and the quotient direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HLadder<T> {
    steps: Vec<T>,
    pub direction: Direction,
}

impl<T: Real> HLadder<T> {
    pub fn new(steps: Vec<T>, direction: Direction) -> Result<Self> {
        if steps.is_empty() {
            return Err(invalid("ladder", "needs at least one step"));
        }
        if steps.iter().any(|h| !(*h > T::zero()) || !h.is_finite()) {
            return Err(invalid("ladder", "steps must be positive"));
        }
        if steps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid("ladder", "steps must be strictly decreasing"));
        }
        Ok(Self { steps, direction })
    }

    /// `h₀, h₀/f, …, h₀/f^{m-1}`.
    pub fn geometric(h0: T, factor: T, m: usize, direction: Direction) -> Result<Self> {
        Self::new((0..m).map(|i| h0 / factor.powi(i as i32)).collect(), direction)
    }

    pub fn steps(&self) -> &[T] {
        &self.steps
    }

    /// Every `t ± h` the quotient touches must lie in `(0, T]`.
    pub fn check(&self, t: T, horizon: T) -> Result<()> {
        for &h in &self.steps {
            for (_, s) in self.direction.stencil(t, h) {
                if !(s >= T::zero() && s <= horizon) || (s == T::zero() && s != t) {
                    return Err(invalid("ladder", format!("step {h} leaves (0, {horizon}] around t={t}")));
                }
            }
        }
        Ok(())
    }
}

/// A process to simulate.
#[derive(Clone)]
pub enum ProcessConfig<T> {
    Fbm { hurst: HurstIndex<T> },
    /// `dX = σ(X) dB + b(X) dt` driven by fBm, on a uniform grid of `steps`.
    Sde {
        hurst: HurstIndex<T>,
        coefficients: CoefficientSet<T>,
        steps: usize,
        scheme: Scheme,
    },
    Volterra { kernel: KernelSpec<T>, steps: usize },
    /// Itô diffusion driven by Brownian motion.
    Wiener { coefficients: CoefficientSet<T>, steps: usize },
    Deterministic { label: String, f: ScalarFn<T> },
}

impl<T: Real> std::fmt::Debug for ProcessConfig<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl<T: Real> ProcessConfig<T> {
    pub fn label(&self) -> String {
        match self {
            Self::Fbm { hurst } => format!("fbm(H={})", hurst.value()),
            Self::Sde { hurst, coefficients, .. } => format!("sde[{}](H={})", coefficients.name, hurst.value()),
            Self::Volterra { kernel, .. } => format!("volterra[{}]", kernel.description()),
            Self::Wiener { coefficients, .. } => format!("wiener[{}]", coefficients.name),
            Self::Deterministic { label, .. } => format!("deterministic[{label}]"),
        }
    }

    /// Roughness index setting the default extrapolation exponent.
    pub fn hurst_hint(&self) -> T {
        match self {
            Self::Fbm { hurst } | Self::Sde { hurst, .. } => hurst.value(),
            Self::Volterra { kernel: KernelSpec::Fbm(k), .. } => k.hurst().value(),
            _ => lit(0.5),
        }
    }

    fn fine_keep(horizon: T, steps: usize, times: &[T]) -> Result<(TimeGrid<T>, Vec<usize>)> {
        let grid = TimeGrid::uniform(horizon, steps)?;
        let dt = horizon / T::from_usize_lossy(steps);
        let mut keep = vec![0usize];
        for &s in times {
            let k = (s / dt).round();
            if (k * dt - s).abs() > horizon * lit(1e-9) {
                return Err(invalid(
                    "steps",
                    format!("time {s} is not a node of the {steps}-step simulation grid"),
                ));
            }
            let k = k.as_f64() as usize;
            if k > 0 && keep.last() != Some(&k) {
                keep.push(k);
            }
        }
        Ok((grid, keep))
    }

    /// Paths observed at `0` and the sorted distinct `times`.
    pub fn sample(&self, times: &[T], params: &EnsembleParams<T>) -> Result<PathEnsemble<T>> {
        let times = distinct_times(times, params.horizon)?;
        let mut pts = vec![T::zero()];
        pts.extend(times.iter().copied().filter(|s| *s > T::zero()));
        let coarse = TimeGrid::from_points(pts)?;
        match self {
            Self::Fbm { hurst } => cholesky_sample(*hurst, &coarse, params.n_paths, params.seed),
            Self::Sde {
                hurst,
                coefficients,
                steps,
                scheme,
            } => {
                if *scheme == Scheme::ProportionalFlow {
                    let b = cholesky_sample(*hurst, &coarse, params.n_paths, params.seed)?;
                    return proportional_ensemble(coefficients, &b);
                }
                let (grid, keep) = Self::fine_keep(params.horizon, *steps, &times)?;
                sde_ensemble(coefficients, *hurst, &grid, &keep, params.n_paths, params.seed, *scheme)
            }
            Self::Volterra { kernel, steps } => {
                let (grid, keep) = Self::fine_keep(params.horizon, *steps, &times)?;
                volterra_sample_at(kernel, &grid, &keep, params.n_paths, params.seed, true)
            }
            Self::Wiener { coefficients, steps } => {
                let (grid, keep) = Self::fine_keep(params.horizon, *steps, &times)?;
                wiener_ensemble(coefficients, &grid, &keep, params.n_paths, params.seed)
            }
            Self::Deterministic { label, f } => {
                let row: Vec<T> = coarse.points().iter().map(|&s| f(s)).collect();
                let values = (0..params.n_paths).flat_map(|_| row.iter().copied()).collect();
                PathEnsemble::new(coarse, params.n_paths, values, None, label.clone())
            }
        }
    }
}

fn distinct_times<T: Real>(times: &[T], horizon: T) -> Result<Vec<T>> {
    let mut v: Vec<T> = times.to_vec();
    if v.iter().any(|s| !(*s >= T::zero() && *s <= horizon)) {
        return Err(invalid("times", format!("all times must lie in [0, {horizon}]")));
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let tol = horizon * lit(1e-9);
    let mut out: Vec<T> = Vec::with_capacity(v.len());
    for s in v {
        if out.last().is_none_or(|p| s - *p > tol) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Ensemble size, seed and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams<T> {
    pub n_paths: usize,
    pub seed: SeedSpec,
    pub horizon: T,
}

/// Thresholds of the verdict rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictConfig<T> {
    /// Variance growth per ladder step counted towards divergence.
    pub growth_threshold: T,
    /// Consecutive qualifying steps (at the fine end of the ladder).
    pub growth_steps: usize,
    /// Cauchy gap tolerance is `max(cauchy_abs, k · SE)` per bin, where `k`
    /// is `cauchy_se` widened by [`simultaneous_multiplier`] over the bins.
    pub cauchy_abs: T,
    pub cauchy_se: T,
    pub bins: BinRule,
    /// Degree of the local polynomial smoothing the limit bins.
    pub value_model_degree: usize,
    /// Smoother bandwidth in bin widths.
    pub smoothing_bins: f64,
    /// Powers of `h` in the extrapolation; `None` picks the default basis.
    pub exponents: Option<Vec<T>>,
    /// Subtract `σ(X_t)(W_{t+h} - W_t)/h` for forward quotients of Itô diffusions.
    pub control_variate: bool,
}

impl<T: Real> Default for VerdictConfig<T> {
    fn default() -> Self {
        Self {
            growth_threshold: lit(1.5),
            growth_steps: 3,
            cauchy_abs: lit(1e-3),
            cauchy_se: lit(3.0),
            bins: BinRule::default(),
            value_model_degree: 2,
            smoothing_bins: 3.0,
            exponents: None,
            control_variate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

/// Outcome of [`estimate_derivative`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport<T> {
    pub process: String,
    pub sigma_field: String,
    pub t: T,
    pub direction: Direction,
    pub ladder: Vec<T>,
    pub levels: Vec<ConditionalEstimate<T>>,
    pub variance_ladder: Vec<T>,
    pub growth: Vec<T>,
    /// Powers of `h` used to extrapolate to `h = 0`.
    pub exponents: Vec<T>,
    /// Extrapolated estimate (fixed conditioning only).
    pub limit: Option<ConditionalEstimate<T>>,
    /// Smoothed limit at every bin centre of `limit`.
    pub value_model: Option<Vec<T>>,
    pub cauchy_gap: T,
    pub cauchy_tolerance: T,
    pub verdict: Verdict,
    pub nondegenerate: bool,
    pub limit_variance: T,
    pub config: VerdictConfig<T>,
}

/// Default powers of `h`: `{0, 2}` for the symmetric quotient, otherwise
/// `{0, κ, 1}` with `κ = 2H - 1` when it lies in `(0, 1)` and `{0, 1}` else.
pub fn default_exponents<T: Real>(hurst: T, direction: Direction, levels: usize) -> Vec<T> {
    let mut e = match direction {
        Direction::Symmetric => vec![T::zero(), lit(2.0)],
        _ => {
            let k = lit::<T>(2.0) * hurst - T::one();
            if k > T::zero() && k < T::one() {
                vec![T::zero(), k, T::one()]
            } else {
                vec![T::zero(), T::one()]
            }
        }
    };
    e.truncate(levels.max(1));
    e
}

/// Weights `w` with `Σ w_i f(h_i)` the weighted least squares value at
/// `h = 0` of `f ≈ Σ_p c_p h^{e_p}` (`exponents[0]` must be `0`).
pub fn extrapolation_weights<T: Real>(steps: &[T], variances: &[T], exponents: &[T]) -> Result<Vec<T>> {
    if exponents.first() != Some(&T::zero()) {
        return Err(invalid("exponents", "the basis must contain the constant h^0 first"));
    }
    let p = exponents.len();
    if steps.len() < p {
        return Err(invalid("ladder", format!("{} steps cannot fit {p} extrapolation terms", steps.len())));
    }
    let design: Vec<Vec<T>> = steps.iter().map(|&h| exponents.iter().map(|&e| h.powf(e)).collect()).collect();
    let floor = variances.iter().copied().fold(T::zero(), T::max) * lit(1e-12) + T::min_positive_value();
    let w: Vec<T> = variances.iter().map(|v| T::one() / v.max(floor)).collect();
    let (_, inv) = weighted_least_squares(&design, &vec![T::zero(); steps.len()], &w)?;
    Ok(design
        .iter()
        .zip(&w)
        .map(|(row, wi)| (0..p).map(|a| inv.get(0, a) * row[a]).sum::<T>() * *wi)
        .collect())
}

/// Extrapolated value and the weights behind it.
pub fn extrapolate<T: Real>(steps: &[T], values: &[T], variances: &[T], exponents: &[T]) -> Result<(T, Vec<T>)> {
    let w = extrapolation_weights(steps, variances, exponents)?;
    Ok((w.iter().zip(values).map(|(a, b)| *a * *b).sum(), w))
}

// Per-path quotient with the optional Itô control variate.
fn level_response<T: Real>(
    process: &ProcessConfig<T>,
    e: &PathEnsemble<T>,
    t: T,
    h: T,
    direction: Direction,
    control: bool,
) -> Result<Vec<T>> {
    let mut y = increments(e, t, h, direction)?;
    if let (true, ProcessConfig::Wiener { coefficients, .. }, Some(_)) = (control, process, e.driver()) {
        if direction == Direction::Backward {
            return Ok(y);
        }
        let scale = if direction == Direction::Symmetric { h + h } else { h };
        let (i0, i1) = (node(e, t)?, node(e, t + h)?);
        for (j, yj) in y.iter_mut().enumerate() {
            let d = e.driver_row(j).expect("driver present");
            let dw: T = d[i0..i1].iter().copied().sum();
            *yj -= (coefficients.sigma)(e.value(j, i0)) * dw / scale;
        }
    }
    Ok(y)
}

/// Runs the regression across the ladder, extrapolates (fixed conditioning)
/// and classifies.
pub fn estimate_derivative<T: Real>(
    process: &ProcessConfig<T>,
    plan: SigmaFieldPlan,
    t: T,
    ladder: &HLadder<T>,
    params: &EnsembleParams<T>,
    cfg: &VerdictConfig<T>,
) -> Result<DerivativeReport<T>> {
    let specs: Vec<SigmaFieldSpec<T>> = ladder.steps().iter().map(|&h| plan.resolve(t, h)).collect::<Result<_>>()?;
    let e = sample_for(process, t, ladder, &specs, params)?;
    estimate_on(process, &e, plan, &specs, t, ladder, cfg)
}

/// Samples the process at every node the ladder and σ-fields touch.
pub fn sample_for<T: Real>(
    process: &ProcessConfig<T>,
    t: T,
    ladder: &HLadder<T>,
    specs: &[SigmaFieldSpec<T>],
    params: &EnsembleParams<T>,
) -> Result<PathEnsemble<T>> {
    ladder.check(t, params.horizon)?;
    let mut times = vec![t];
    for (&h, s) in ladder.steps().iter().zip(specs) {
        times.extend(ladder.direction.stencil(t, h).iter().map(|(_, u)| *u));
        times.extend(s.conditioning_times());
    }
    process.sample(&times, params)
}

/// [`estimate_derivative`] on an already sampled ensemble.
pub fn estimate_on<T: Real>(
    process: &ProcessConfig<T>,
    e: &PathEnsemble<T>,
    plan: SigmaFieldPlan,
    specs: &[SigmaFieldSpec<T>],
    t: T,
    ladder: &HLadder<T>,
    cfg: &VerdictConfig<T>,
) -> Result<DerivativeReport<T>> {
    let steps = ladder.steps();
    let dir = ladder.direction;
    let mut responses = Vec::with_capacity(steps.len());
    let mut conds = Vec::with_capacity(steps.len());
    let mut levels = Vec::with_capacity(steps.len());
    for (&h, spec) in steps.iter().zip(specs) {
        let y = level_response(process, e, t, h, dir, cfg.control_variate)?;
        let c = conditioning(e, spec)?;
        levels.push(estimate_from(&c, &y, cfg.bins)?);
        responses.push(y);
        conds.push(c);
    }
    let variance_ladder: Vec<T> = levels.iter().map(|l| l.variance).collect();
    let growth: Vec<T> = variance_ladder
        .windows(2)
        .map(|w| if w[0] > T::zero() { w[1] / w[0] } else { T::infinity() })
        .collect();
    let divergent = cfg.growth_steps > 0
        && growth.len() >= cfg.growth_steps
        && variance_ladder.iter().all(|v| *v > T::zero())
        && growth[growth.len() - cfg.growth_steps..].iter().all(|g| *g >= cfg.growth_threshold);

    let exponents = cfg
        .exponents
        .clone()
        .unwrap_or_else(|| default_exponents(process.hurst_hint(), dir, steps.len()));
    let mut limit = None;
    let mut value_model = None;
    if plan.is_fixed() {
        let var: Vec<T> = levels.iter().map(|l| l.response_variance).collect();
        let (_, w) = extrapolate(steps, &vec![T::zero(); steps.len()], &var, &exponents)?;
        let n = e.n_paths();
        let combined: Vec<T> = (0..n).map(|j| w.iter().zip(&responses).map(|(wi, y)| *wi * y[j]).sum()).collect();
        let l = estimate_from(&conds[0], &combined, cfg.bins)?;
        if let Some(b) = l.bins.iter().find(|b| b.hi > b.lo) {
            let bandwidth = (b.hi - b.lo) * lit(cfg.smoothing_bins);
            value_model = local_polynomial(&l.bins, bandwidth, cfg.value_model_degree).ok();
        } else if !l.bins.is_empty() {
            value_model = Some(l.bins.iter().map(|b| b.estimate).collect());
        }
        limit = Some(l);
    }

    let (cauchy_gap, cauchy_tolerance, cauchy) = if steps.len() < 2 {
        (T::infinity(), T::zero(), false)
    } else {
        let m = steps.len() - 1;
        cauchy_check(&conds[m - 1], &conds[m], &responses[m - 1], &responses[m], plan.is_fixed(), cfg)?
    };
    let verdict = if divergent {
        Verdict::Divergent
    } else if cauchy {
        Verdict::Convergent
    } else {
        Verdict::Inconclusive
    };
    let last = limit.as_ref().unwrap_or_else(|| levels.last().expect("non-empty ladder"));
    Ok(DerivativeReport {
        process: process.label(),
        sigma_field: plan.to_string(),
        t,
        direction: dir,
        ladder: steps.to_vec(),
        variance_ladder,
        growth,
        exponents,
        nondegenerate: last.nondegenerate,
        limit_variance: last.variance,
        limit,
        value_model,
        cauchy_gap,
        cauchy_tolerance,
        verdict,
        levels,
        config: cfg.clone(),
    })
}

// Gap between the two finest levels: per bin of the common conditioning
// value, or between fitted values when the conditioning changes.
fn cauchy_check<T: Real>(
    c_prev: &Conditioning<T>,
    c_last: &Conditioning<T>,
    y_prev: &[T],
    y_last: &[T],
    fixed: bool,
    cfg: &VerdictConfig<T>,
) -> Result<(T, T, bool)> {
    let n = y_last.len();
    if fixed {
        let d: Vec<T> = y_last.iter().zip(y_prev).map(|(a, b)| *a - *b).collect();
        let est = estimate_from(c_last, &d, cfg.bins)?;
        let pairs: Vec<(T, T)> = if est.bins.is_empty() {
            est.coefficients.iter().copied().zip(est.coefficient_se.iter().copied()).collect()
        } else {
            est.bins.iter().filter(|b| !b.excluded).map(|b| (b.estimate, b.se)).collect()
        };
        let k = simultaneous_multiplier(cfg.cauchy_se, pairs.len());
        // report the comparison closest to failing
        let (mut gap, mut tol_at_gap, mut worst) = (T::zero(), cfg.cauchy_abs, T::neg_infinity());
        for (g, se) in pairs {
            let tol = cfg.cauchy_abs.max(k * se);
            let ratio = g.abs() / tol;
            if ratio > worst {
                (gap, tol_at_gap, worst) = (g.abs(), tol, ratio);
            }
        }
        return Ok((gap, tol_at_gap, !(worst > T::one())));
    }
    let fit = |c: &Conditioning<T>, y: &[T]| -> Result<(Vec<T>, T, usize)> {
        match c {
            Conditioning::Vector(xs) => {
                let (_, _, f, s2) = super::regress::linear_regression(xs, y)?;
                Ok((f, s2, xs[0].len()))
            }
            Conditioning::Scalar(x) => {
                let rows: Vec<Vec<T>> = x.iter().map(|v| vec![*v]).collect();
                let (_, _, f, s2) = super::regress::linear_regression(&rows, y)?;
                Ok((f, s2, 1))
            }
        }
    };
    let (fa, sa, ka) = fit(c_prev, y_prev)?;
    let (fb, sb, kb) = fit(c_last, y_last)?;
    let nn = T::from_usize_lossy(n);
    let gap = (fa.iter().zip(&fb).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>() / nn).sqrt();
    let se = ((T::from_usize_lossy(ka + 1) * sa + T::from_usize_lossy(kb + 1) * sb) / nn).sqrt();
    let tol = cfg.cauchy_abs.max(cfg.cauchy_se * se);
    Ok((gap, tol, gap <= tol))
}

/// Per-comparison multiplier giving `m` independent two-sided comparisons the
/// same joint false-alarm rate as a single `k`-sigma comparison (Šidák).
pub fn simultaneous_multiplier<T: Real>(k: T, m: usize) -> T {
    use statrs::distribution::{ContinuousCDF, Normal};
    if m <= 1 {
        return k;
    }
    let n = Normal::standard();
    let single = 2.0 * n.sf(k.as_f64());
    // 1 - (1 - single)^(1/m)
    let each = -((-single).ln_1p() / m as f64).exp_m1();
    lit(n.inverse_cdf(1.0 - each / 2.0))
}

/// Relative L² distance, weighted by bin counts, between the smoothed limit
/// and `truth` over the retained bins.
pub fn report_relative_l2<T: Real>(report: &DerivativeReport<T>, truth: impl Fn(T) -> T) -> Result<T> {
    let limit = report.limit.as_ref().ok_or(Error::Singular("report without an extrapolated limit"))?;
    let model = report.value_model.as_ref().ok_or(Error::Singular("report without a value model"))?;
    let (mut num, mut den) = (T::zero(), T::zero());
    for (b, m) in limit.bins.iter().zip(model) {
        if b.excluded {
            continue;
        }
        let w = T::from_usize_lossy(b.count);
        let f = truth(b.center);
        num += w * (*m - f) * (*m - f);
        den += w * f * f;
    }
    Ok((num / den).sqrt())
}
