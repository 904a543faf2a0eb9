//! Hölder seminorms and two independent evaluators of the Young integral.

use crate::error::{invalid, Error, Result};
use crate::frac::{rl_derivative, Side};
use crate::grid::{FracOrder, GridFunction, HolderExponent};
use crate::scalar::{lit, Real};

/// How [`holder_norm`] searches pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HolderMode {
    /// All `O(n²)` pairs of grid nodes.
    Exact,
    /// Pairs `(k, k + 2^j)` only; a lower bound within a constant factor,
    /// `O(n log n)`.
    Dyadic,
}

/// Discrete `sup |h(t) - h(s)| / |t - s|^μ` over node pairs.
pub fn holder_norm<T: Real>(h: &GridFunction<T>, mu: HolderExponent<T>, mode: HolderMode) -> T {
    let x = h.points();
    let v = h.samples();
    let n = x.len();
    let m = mu.value();
    let mut best = T::zero();
    match mode {
        HolderMode::Exact => {
            for a in 0..n {
                for b in a + 1..n {
                    best = best.max((v[b] - v[a]).abs() / (x[b] - x[a]).powf(m));
                }
            }
        }
        HolderMode::Dyadic => {
            let mut lag = 1;
            while lag < n {
                for a in 0..n - lag {
                    best = best.max((v[a + lag] - v[a]).abs() / (x[a + lag] - x[a]).powf(m));
                }
                lag *= 2;
            }
        }
    }
    best
}

fn same_nodes<T: Real>(a: &GridFunction<T>, b: &GridFunction<T>) -> Result<()> {
    if a.points() != b.points() {
        return Err(invalid("grid", "integrand and integrator must share nodes"));
    }
    Ok(())
}

/// Running left-point sums `Σ Z_{t_k}(X_{t_{k+1}} - X_{t_k})`.
pub fn young_riemann<T: Real>(z: &GridFunction<T>, x: &GridFunction<T>) -> Result<GridFunction<T>> {
    same_nodes(z, x)?;
    let (zv, xv) = (z.samples(), x.samples());
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(zv.len());
    out.push(acc);
    for k in 0..zv.len() - 1 {
        acc += zv[k] * (xv[k + 1] - xv[k]);
        out.push(acc);
    }
    z.with_samples(out)
}

/// Running trapezoid sums `Σ (Z_{t_k} + Z_{t_{k+1}})/2 (X_{t_{k+1}} - X_{t_k})`.
pub fn young_trapezoid<T: Real>(z: &GridFunction<T>, x: &GridFunction<T>) -> Result<GridFunction<T>> {
    same_nodes(z, x)?;
    let (zv, xv) = (z.samples(), x.samples());
    let half = lit::<T>(0.5);
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(zv.len());
    out.push(acc);
    for k in 0..zv.len() - 1 {
        acc += half * (zv[k] + zv[k + 1]) * (xv[k + 1] - xv[k]);
        out.push(acc);
    }
    z.with_samples(out)
}

/// Admissible `γ` for exponents `α` (of `f`) and `β` (of `g`): `1 - β < γ < α`.
pub fn gamma_interval<T: Real>(alpha: HolderExponent<T>, beta: HolderExponent<T>) -> Result<(T, T)> {
    let lo = T::one() - beta.value();
    let hi = alpha.value();
    if !(lo < hi) {
        return Err(Error::EmptyGammaInterval {
            alpha: alpha.value().as_f64(),
            beta: beta.value().as_f64(),
        });
    }
    Ok((lo, hi))
}

/// `∫_a^b f dg = -∫_a^b D^γ_{a+} f(x) · D^{1-γ}_{b-} g_{b-}(x) dx` with
/// `g_{b-} = g - g(b)` and unsigned right derivatives. `γ` defaults to the
/// midpoint of the admissible interval.
pub fn young_fractional<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    alpha: HolderExponent<T>,
    beta: HolderExponent<T>,
    gamma: Option<T>,
) -> Result<T> {
    same_nodes(f, g)?;
    let (lo, hi) = gamma_interval(alpha, beta)?;
    let gamma = gamma.unwrap_or((lo + hi) * lit(0.5));
    if !(gamma > lo && gamma < hi) {
        return Err(invalid("gamma", format!("{gamma} outside the admissible interval ({lo}, {hi})")));
    }
    if gamma >= T::one() {
        return Err(invalid("gamma", "fractional order must be below 1"));
    }
    let n = f.len();
    if n < 4 {
        return Err(invalid("f", "needs at least four nodes"));
    }
    let gb = g.samples()[n - 1];
    let g_shift = g.map(|_, v| v - gb)?;
    let df = rl_derivative(f, FracOrder::new(gamma)?, Side::Left)?; // nodes 1..n
    let dg = rl_derivative(&g_shift, FracOrder::new(T::one() - gamma)?, Side::Right)?; // nodes 0..n-1
    let x = f.points();
    // interior product at nodes 1..n-1
    let prod: Vec<T> = (1..n - 1).map(|k| df.samples()[k - 1] * dg.samples()[k]).collect();
    let mut acc = T::zero();
    for k in 1..n - 2 {
        acc += (prod[k - 1] + prod[k]) * lit(0.5) * (x[k + 1] - x[k]);
    }
    // end cells: the product behaves like (x-a)^{-γ} at a and vanishes like (b-x)^γ at b
    acc += prod[0] * (x[1] - x[0]) / (T::one() - gamma);
    acc += prod[n - 3] * (x[n - 1] - x[n - 2]) / (T::one() + gamma);
    Ok(-acc)
}

/// Result of [`young_bound_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport<T> {
    pub kappa: T,
    pub ratios: Vec<T>,
    pub holder_f: T,
    pub holder_g: T,
}

/// Empirical constant in `|∫_s^t (f(r) - f(s)) dg(r)| ≤ κ |f|_α |g|_β |t - s|^{α+β}`
/// over node pairs `(s, t)`.
pub fn young_bound_check<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    alpha: HolderExponent<T>,
    beta: HolderExponent<T>,
    pairs: &[(usize, usize)],
) -> Result<BoundReport<T>> {
    same_nodes(f, g)?;
    if !(alpha.value() + beta.value() > T::one()) {
        return Err(invalid("alpha", "needs alpha + beta > 1"));
    }
    let hf = holder_norm(f, alpha, HolderMode::Exact);
    let hg = holder_norm(g, beta, HolderMode::Exact);
    let x = f.points();
    let (fv, gv) = (f.samples(), g.samples());
    let mut ratios = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        if !(s < t && t < x.len()) {
            return Err(invalid("pairs", format!("need s < t inside the grid, got ({s}, {t})")));
        }
        let integral: T = (s..t).map(|k| (fv[k] - fv[s]) * (gv[k + 1] - gv[k])).sum();
        let denom = hf * hg * (x[t] - x[s]).powf(alpha.value() + beta.value());
        ratios.push(if denom > T::zero() { integral.abs() / denom } else { T::zero() });
    }
    let kappa = ratios.iter().fold(T::zero(), |a, &b| a.max(b));
    Ok(BoundReport {
        kappa,
        ratios,
        holder_f: hf,
        holder_g: hg,
    })
}
