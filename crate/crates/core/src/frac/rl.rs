//! Riemann-Liouville integrals and Marchaud derivatives of grid functions.
//!
//! Integrals use product integration: the kernel moments are exact and the
//! integrand is the piecewise-linear interpolant of the samples. Derivatives
//! are exact for the piecewise-linear interpolant as well.

use crate::error::{invalid, Result};
use crate::grid::{FracOrder, GridFunction};
use crate::scalar::{lit, Real};
use crate::special::{beta, gamma};

/// Which endpoint the operator is anchored at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `a+`: integrates over `[a, x]`.
    Left,
    /// `b-`: integrates over `[x, b]`.
    Right,
}

const GL8: [(f64, f64); 8] = [
    (0.019_855_071_751_231_856, 0.050_614_268_145_188_13),
    (0.101_666_761_293_186_63, 0.111_190_517_226_687_24),
    (0.237_233_795_041_835_5, 0.156_853_322_938_943_64),
    (0.408_282_678_752_175_1, 0.181_341_891_689_180_99),
    (0.591_717_321_247_824_9, 0.181_341_891_689_180_99),
    (0.762_766_204_958_164_5, 0.156_853_322_938_943_64),
    (0.898_333_238_706_813_4, 0.111_190_517_226_687_24),
    (0.980_144_928_248_768_1, 0.050_614_268_145_188_13),
];

pub(crate) fn gauss_legendre_unit<T: Real>() -> impl Iterator<Item = (T, T)> {
    GL8.iter().map(|&(x, w)| (lit(x), lit(w)))
}

fn reflect<T: Real>(f: &GridFunction<T>, sum: T) -> Result<GridFunction<T>> {
    let pts = f.points().iter().rev().map(|&x| sum - x).collect();
    let vals = f.samples().iter().rev().copied().collect();
    GridFunction::new(pts, vals)
}

/// `∫_a^{x_k} (x_k - y)^{α-1} y'^{-γ} f(y) dy` at every node, `y' = y - a`,
/// with `f` piecewise linear. `γ = 0` is exact; for `γ > 0` the weight is
/// folded into the interpolant away from the first cell.
pub(crate) fn weighted_left_moments<T: Real>(f: &GridFunction<T>, alpha: T, gamma_w: T) -> Vec<T> {
    let a = f.start();
    let x: Vec<T> = f.points().iter().map(|&p| p - a).collect();
    let n = x.len();
    let g: Vec<T> = if gamma_w == T::zero() {
        f.samples().to_vec()
    } else {
        x.iter()
            .zip(f.samples())
            .map(|(&xi, &fi)| if xi > T::zero() { xi.powf(-gamma_w) * fi } else { T::zero() })
            .collect()
    };
    let first = if gamma_w == T::zero() { 0 } else { 1 };
    let ap1 = alpha + T::one();
    let mut out = vec![T::zero(); n];
    let mut pa = vec![T::zero(); n];
    let mut pa1 = vec![T::zero(); n];
    for k in 1..n {
        let xk = x[k];
        for j in 0..=k {
            let u = xk - x[j];
            pa[j] = u.powf(alpha);
            pa1[j] = pa[j] * u;
        }
        let mut acc = T::zero();
        for j in first..k {
            if first == 1 && j < NEAR_ORIGIN_CELLS {
                acc += near_origin_cell(&x, f.samples(), j, xk, alpha, gamma_w);
                continue;
            }
            let h = x[j + 1] - x[j];
            let slope = (g[j + 1] - g[j]) / h;
            let bigb = xk - x[j];
            let m0 = (pa[j] - pa[j + 1]) / alpha;
            let m1 = (pa1[j] - pa1[j + 1]) / ap1;
            acc += g[j] * m0 + slope * (bigb * m0 - m1);
        }
        if first == 1 {
            let (f0, f1) = (f.samples()[0], f.samples()[1]);
            let y1 = x[1];
            if k == 1 {
                let scale = y1.powf(alpha - gamma_w);
                let one = T::one();
                acc += scale * (f0 * beta(alpha, one - gamma_w) + (f1 - f0) * beta(alpha, lit::<T>(2.0) - gamma_w));
            } else {
                let m = T::one() / (T::one() - gamma_w);
                let pref = m * y1.powf(T::one() - gamma_w);
                for (w, wt) in gauss_legendre_unit::<T>() {
                    let y = y1 * w.powf(m);
                    let fy = f0 + (f1 - f0) * y / y1;
                    acc += wt * pref * (xk - y).powf(alpha - T::one()) * fy;
                }
            }
        }
        out[k] = acc;
    }
    out
}

const NEAR_ORIGIN_CELLS: usize = 64;

// Gauss rule on one cell with the weight evaluated exactly; the cell ending
// at `xk` is mapped so that `(xk - y)^{α-1}` disappears.
fn near_origin_cell<T: Real>(x: &[T], f: &[T], j: usize, xk: T, alpha: T, gamma_w: T) -> T {
    let (y0, y1) = (x[j], x[j + 1]);
    let h = y1 - y0;
    let lin = |y: T| f[j] + (f[j + 1] - f[j]) * (y - y0) / h;
    let mut acc = T::zero();
    if y1 == xk {
        let inv = T::one() / alpha;
        let top = h.powf(alpha);
        for (w, wt) in gauss_legendre_unit::<T>() {
            let y = xk - (w * top).powf(inv);
            acc += wt * top * inv * y.powf(-gamma_w) * lin(y);
        }
    } else {
        for (w, wt) in gauss_legendre_unit::<T>() {
            let y = y0 + w * h;
            acc += wt * h * (xk - y).powf(alpha - T::one()) * y.powf(-gamma_w) * lin(y);
        }
    }
    acc
}

fn left_integral<T: Real>(f: &GridFunction<T>, alpha: T) -> Result<GridFunction<T>> {
    if alpha == T::one() {
        return f.cumulative_integral();
    }
    let scale = T::one() / gamma(alpha);
    let v = weighted_left_moments(f, alpha, T::zero());
    f.with_samples(v.into_iter().map(|m| m * scale).collect())
}

/// `I^α_{a+} f` or `I^α_{b-} f` on the nodes of `f`.
///
/// The right-sided integral is returned without the `(-1)^{-α}` phase.
pub fn rl_integral<T: Real>(f: &GridFunction<T>, alpha: FracOrder<T>, side: Side) -> Result<GridFunction<T>> {
    if f.len() < 2 {
        return Err(invalid("f", "needs at least two nodes"));
    }
    match side {
        Side::Left => left_integral(f, alpha.value()),
        Side::Right => {
            let sum = f.start() + f.end();
            reflect(&left_integral(&reflect(f, sum)?, alpha.value())?, sum)
        }
    }
}

/// `(1/Γ(α)) ∫_a^x (x-y)^{α-1} (y-a)^{-γ} f(y) dy` for `0 ≤ γ < 1`.
pub fn rl_integral_weighted<T: Real>(f: &GridFunction<T>, alpha: FracOrder<T>, gamma_w: T) -> Result<GridFunction<T>> {
    if !(gamma_w >= T::zero() && gamma_w < T::one()) {
        return Err(invalid("gamma", format!("weight exponent must lie in [0, 1), got {gamma_w}")));
    }
    if f.len() < 2 {
        return Err(invalid("f", "needs at least two nodes"));
    }
    let scale = T::one() / gamma(alpha.value());
    let v = weighted_left_moments(f, alpha.value(), gamma_w);
    f.with_samples(v.into_iter().map(|m| m * scale).collect())
}

fn left_marchaud<T: Real>(f: &GridFunction<T>, alpha: T) -> Result<GridFunction<T>> {
    let pts = &f.points()[1..];
    if alpha == T::one() {
        let d = f.derivative()?;
        return GridFunction::new(pts.to_vec(), d.samples()[1..].to_vec());
    }
    let a = f.start();
    let x: Vec<T> = f.points().iter().map(|&p| p - a).collect();
    let y = f.samples();
    let n = x.len();
    let one_m = T::one() - alpha;
    let scale = T::one() / gamma(one_m);
    let mut out = Vec::with_capacity(n - 1);
    let mut pm = vec![T::zero(); n];
    let mut p1 = vec![T::zero(); n];
    for k in 1..n {
        let xk = x[k];
        for j in 0..k {
            let u = xk - x[j];
            pm[j] = u.powf(-alpha);
            p1[j] = pm[j] * u;
        }
        let mut acc = y[k] * pm[0];
        for j in 0..k {
            let h = x[j + 1] - x[j];
            let slope = (y[j + 1] - y[j]) / h;
            if j + 1 == k {
                acc += alpha * slope * p1[j] / one_m;
            } else {
                let bigb = xk - x[j];
                let d0 = y[k] - y[j] - slope * bigb;
                acc += d0 * (pm[j + 1] - pm[j]) + alpha * slope * (p1[j] - p1[j + 1]) / one_m;
            }
        }
        out.push(acc * scale);
    }
    GridFunction::new(pts.to_vec(), out)
}

/// Marchaud derivative `D^α_{a+} f` (on nodes after `a`) or `D^α_{b-} f`
/// (on nodes before `b`). `α = 1` falls back to the grid derivative.
pub fn rl_derivative<T: Real>(f: &GridFunction<T>, alpha: FracOrder<T>, side: Side) -> Result<GridFunction<T>> {
    if f.len() < 3 {
        return Err(invalid("f", "needs at least three nodes"));
    }
    match side {
        Side::Left => corrected_marchaud(f, alpha.value()),
        Side::Right => {
            let sum = f.start() + f.end();
            reflect(&corrected_marchaud(&reflect(f, sum)?, alpha.value())?, sum)
        }
    }
}

/// Splits off `A (x-a)^α`, the leading endpoint term of anything in the
/// range of `I^α`, fitted with a linear term from the first two cells.
/// Its derivative `A Γ(1+α)` is exact; the remainder goes through the
/// piecewise-linear scheme. Linear data gives `A = 0`.
fn corrected_marchaud<T: Real>(f: &GridFunction<T>, alpha: T) -> Result<GridFunction<T>> {
    if alpha == T::one() {
        return left_marchaud(f, alpha);
    }
    let a = f.start();
    let (p, y) = (f.points(), f.samples());
    let (x1, x2) = (p[1] - a, p[2] - a);
    let (d1, d2) = (y[1] - y[0], y[2] - y[0]);
    let det = x1.powf(alpha) * x2 - x2.powf(alpha) * x1;
    let amp = (d1 * x2 - d2 * x1) / det;
    if !amp.is_finite() || amp == T::zero() {
        return left_marchaud(f, alpha);
    }
    let rest = f.map(|x, v| v - amp * (x - a).powf(alpha))?;
    let d = left_marchaud(&rest, alpha)?;
    let shift = amp * gamma(T::one() + alpha);
    d.map(|_, v| v + shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ord(a: f64) -> FracOrder<f64> {
        FracOrder::new(a).unwrap()
    }

    #[test]
    fn integral_of_monomials() {
        for (alpha, b) in [(0.3, 1.0), (0.5, 2.0), (0.75, 0.0), (1.0, 1.0)] {
            let f = GridFunction::uniform(0.0, 1.0, 1024, |x: f64| x.powf(b)).unwrap();
            let r = rl_integral(&f, ord(alpha), Side::Left).unwrap();
            let c = gamma(b + 1.0) / gamma(b + 1.0 + alpha);
            let exact = f.map(|x, _| c * x.powf(b + alpha)).unwrap();
            assert!(r.max_abs_diff(&exact) < 2e-6, "α={alpha} β={b}: {}", r.max_abs_diff(&exact));
        }
    }

    #[test]
    fn integral_of_linear_function_is_exact_on_nonuniform_grid() {
        let pts: Vec<f64> = (0..=40).map(|i| (i as f64 / 40.0).powi(2)).collect();
        let f = GridFunction::from_fn(pts, |x| 2.0 - 3.0 * x).unwrap();
        let r = rl_integral(&f, ord(0.4), Side::Left).unwrap();
        let exact = f
            .map(|x, _| 2.0 * x.powf(0.4) / gamma(1.4) - 3.0 * x.powf(1.4) / gamma(2.4))
            .unwrap();
        assert!(r.max_abs_diff(&exact) < 1e-13);
    }

    #[test]
    fn right_integral_mirrors_left() {
        let f = GridFunction::uniform(0.0, 1.0, 256, |x: f64| (1.0 - x).powi(2)).unwrap();
        let r = rl_integral(&f, ord(0.6), Side::Right).unwrap();
        let c = gamma(3.0) / gamma(3.6);
        let exact = f.map(|x, _| c * (1.0 - x).powf(2.6)).unwrap();
        assert!(r.max_abs_diff(&exact) < 1e-5);
    }

    #[test]
    fn derivative_of_monomials() {
        for (alpha, b) in [(0.3, 1.0), (0.5, 2.0), (0.7, 1.5)] {
            let f = GridFunction::uniform(0.0, 1.0, 2048, |x: f64| x.powf(b)).unwrap();
            let d = rl_derivative(&f, ord(alpha), Side::Left).unwrap();
            let c = gamma(b + 1.0) / gamma(b + 1.0 - alpha);
            let err = d
                .points()
                .iter()
                .zip(d.samples())
                .map(|(x, v)| (v - c * x.powf(b - alpha)).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-3, "α={alpha} β={b}: {err}");
        }
    }

    #[test]
    fn derivative_of_constant_and_right_side() {
        let f = GridFunction::uniform(0.0, 1.0, 64, |_x: f64| 1.0).unwrap();
        let d = rl_derivative(&f, ord(0.4), Side::Left).unwrap();
        for (x, v) in d.points().iter().zip(d.samples()) {
            assert!((v - x.powf(-0.4) / gamma(0.6)).abs() < 1e-12);
        }
        let g = GridFunction::uniform(0.0, 1.0, 512, |x: f64| 1.0 - x).unwrap();
        let d = rl_derivative(&g, ord(0.4), Side::Right).unwrap();
        assert_eq!(d.end(), 1.0 - 1.0 / 512.0);
        for (x, v) in d.points().iter().zip(d.samples()) {
            assert!((v - (1.0 - x).powf(0.6) / gamma(1.6)).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_integral_matches_beta_formula() {
        // ∫_0^x (x-y)^{α-1} y^{-γ} dy = B(α, 1-γ) x^{α-γ}
        let f = GridFunction::uniform(0.0, 1.0, 2048, |_x: f64| 1.0).unwrap();
        let r = rl_integral_weighted(&f, ord(0.25), 0.25).unwrap();
        let exact = f.map(|x, _| beta(0.25, 0.75) * x.powf(0.0) / gamma(0.25)).unwrap();
        let err = r.samples()[1..].iter().zip(&exact.samples()[1..]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn derivative_inverts_integral(alpha in 0.1f64..0.9, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, w in 0.5f64..3.0) {
            let f = GridFunction::uniform(0.0, 1.0, 2048, |x: f64| c1 * x + c2 * (w * x).sin() * x).unwrap();
            let i = rl_integral(&f, ord(alpha), Side::Left).unwrap();
            let d = rl_derivative(&i, ord(alpha), Side::Left).unwrap();
            let err = d.points().iter().zip(d.samples()).map(|(x, v)| (v - f.eval(*x)).abs()).fold(0.0, f64::max);
            prop_assert!(err < 1e-3, "err {}", err);
        }

        #[test]
        fn integral_is_linear(alpha in 0.1f64..1.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let f = GridFunction::uniform(0.0, 1.0, 128, |x: f64| x.exp()).unwrap();
            let g = GridFunction::uniform(0.0, 1.0, 128, |x: f64| (3.0 * x).cos()).unwrap();
            let comb = f.map(|x, v| a * v + b * g.eval(x)).unwrap();
            let lhs = rl_integral(&comb, ord(alpha), Side::Left).unwrap();
            let fi = rl_integral(&f, ord(alpha), Side::Left).unwrap();
            let gi = rl_integral(&g, ord(alpha), Side::Left).unwrap();
            let rhs = fi.map(|x, v| a * v + b * gi.eval(x)).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
    }
}
