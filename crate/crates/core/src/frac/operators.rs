//! The operators `K_H`, `K_H^{-1}` and `O_H = d/dt K_H`, and the inner
//! product of the fBm reproducing space.

use crate::error::{invalid, Error, Result};
use crate::grid::{FracOrder, GridFunction, HurstIndex};
use crate::scalar::{lit, Real};
use crate::special::gamma;

use super::kernel::FbmKernel;
use super::rl::{gauss_legendre_unit, rl_derivative, rl_integral_weighted, Side};

fn regular_kernel<T: Real>(hurst: HurstIndex<T>) -> Result<FbmKernel<T>> {
    if hurst.value() < lit(0.5) {
        return Err(Error::UnsupportedKernelForm(hurst.value().as_f64()));
    }
    FbmKernel::new(hurst)
}

fn starts_at_zero<T: Real>(f: &GridFunction<T>) -> Result<()> {
    if f.start() != T::zero() {
        return Err(invalid("grid", format!("operator needs a grid starting at 0, got {}", f.start())));
    }
    Ok(())
}

const GL4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// `(K_H h)(t) = ∫_0^t K_H(t, s) h(s) ds` by quadrature in `s` against the
/// kernel itself. For every quadrature node `s` the inner integral
/// `∫_s^t (u-s)^{H-3/2} u^{H-1/2} du` is accumulated cell by cell in `t`.
pub fn op_kh<T: Real>(h: &GridFunction<T>, hurst: HurstIndex<T>) -> Result<GridFunction<T>> {
    let kernel = regular_kernel(hurst)?;
    starts_at_zero(h)?;
    if hurst.is_brownian() {
        return h.cumulative_integral();
    }
    let p = hurst.value() - lit(0.5);
    let inv_p = T::one() / p;
    let pp1 = p + T::one();
    let t = h.points();
    let n = t.len();
    let tp: Vec<T> = t.iter().map(|x| x.powf(p)).collect();
    let mut out = vec![T::zero(); n];

    // nodes: singular-mapped Gauss rule on the first cell, plain Gauss after
    let mut nodes: Vec<(usize, T, T)> = Vec::with_capacity(4 * n + 8);
    let m = T::one() / (T::one() - p);
    for (w, wt) in gauss_legendre_unit::<T>() {
        let s = t[1] * w.powf(m);
        nodes.push((0, s, wt * t[1] * m * w.powf(m - T::one())));
    }
    for j in 1..n - 1 {
        let cell = t[j + 1] - t[j];
        for &(w, wt) in &GL4 {
            nodes.push((j, t[j] + lit::<T>(w) * cell, lit::<T>(wt) * cell));
        }
    }

    for &(j, s, wt) in &nodes {
        let weight = wt * h.eval(s) * kernel.constant() * s.powf(-p);
        if weight == T::zero() {
            continue;
        }
        // [s, t_{j+1}] in the variable w = (u - s)^p, where the integrand is smooth
        let top = (t[j + 1] - s).powf(p);
        let mut inner = T::zero();
        for (w, gw) in gauss_legendre_unit::<T>() {
            let v = w * top;
            inner += gw * top * inv_p * (s + v.powf(inv_p)).powf(p);
        }
        out[j + 1] += weight * inner;
        let mut a = t[j + 1] - s;
        let mut ap = a.powf(p);
        for k in j + 1..n - 1 {
            let b = t[k + 1] - s;
            let bp = b.powf(p);
            let slope = (tp[k + 1] - tp[k]) / (t[k + 1] - t[k]);
            inner += (tp[k] - slope * a) * (bp - ap) * inv_p + slope * (bp * b - ap * a) / pp1;
            out[k + 1] += weight * inner;
            a = b;
            ap = bp;
        }
    }
    h.with_samples(out)
}

/// `(O_H φ)(s) = c_H Γ(H-1/2) s^{H-1/2} I^{H-1/2}_{0+}(u^{1/2-H} φ)(s)`,
/// the derivative of `t ↦ (K_H φ)(t)`.
pub fn op_oh<T: Real>(phi: &GridFunction<T>, hurst: HurstIndex<T>) -> Result<GridFunction<T>> {
    let kernel = regular_kernel(hurst)?;
    starts_at_zero(phi)?;
    if hurst.is_brownian() {
        return Ok(phi.clone());
    }
    let p = hurst.value() - lit(0.5);
    let norm = kernel.constant() * gamma(p);
    let inner = rl_integral_weighted(phi, FracOrder::new(p)?, p)?;
    inner.map(|s, v| if s > T::zero() { norm * s.powf(p) * v } else { T::zero() })
}

/// `K_H^{-1} φ = (c_H Γ(H-1/2))^{-1} s^{H-1/2} D^{H-1/2}_{0+}(u^{1/2-H} φ')`.
///
/// `φ'` is the grid derivative; the value of `u^{1/2-H} φ'` at the origin is
/// extrapolated linearly from the next two nodes.
pub fn op_kh_inverse<T: Real>(phi: &GridFunction<T>, hurst: HurstIndex<T>) -> Result<GridFunction<T>> {
    let kernel = regular_kernel(hurst)?;
    starts_at_zero(phi)?;
    let scale = phi.samples().iter().fold(T::one(), |a, v| a.max(v.abs()));
    if phi.samples()[0].abs() > scale * lit(1e-12) {
        return Err(invalid("phi", format!("K_H^-1 needs phi(0) = 0, got {}", phi.samples()[0])));
    }
    let dphi = phi.derivative()?;
    if hurst.is_brownian() {
        return Ok(dphi);
    }
    if phi.len() < 4 {
        return Err(invalid("phi", "needs at least four nodes"));
    }
    let p = hurst.value() - lit(0.5);
    let x = phi.points();
    let mut g: Vec<T> = x.iter().zip(dphi.samples()).map(|(&s, &d)| if s > T::zero() { s.powf(-p) * d } else { T::zero() }).collect();
    g[0] = g[1] - (g[2] - g[1]) * x[1] / (x[2] - x[1]);
    let g = phi.with_samples(g)?;
    let d = rl_derivative(&g, FracOrder::new(p)?, Side::Left)?;
    let norm = T::one() / (kernel.constant() * gamma(p));
    let mut out = Vec::with_capacity(phi.len());
    out.push(norm * g.samples()[0] / gamma(T::one() - p));
    out.extend(d.points().iter().zip(d.samples()).map(|(&s, &v)| norm * s.powf(p) * v));
    phi.with_samples(out)
}

/// Signed bilinear form or the `|H|` norm pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingMode {
    Signed,
    Absolute,
}

// Jumps and slope changes of `f` extended by zero outside its domain:
// f = Σ J_i 1{u ≥ x_i} + Σ K_i (u - x_i)⁺. Cells narrower than
// `sqrt(ε)·(b - a)` are read as jumps.
fn steps_and_ramps<T: Real>(f: &GridFunction<T>) -> Vec<(T, T, T)> {
    let x = f.points();
    let v = f.samples();
    let n = x.len();
    let tiny = (f.end() - f.start()) * T::epsilon().sqrt();
    let mut out: Vec<(T, T, T)> = Vec::with_capacity(n + 1);
    let mut push = |at: T, jump: T, kink: T| match out.last_mut() {
        Some(last) if last.0 == at => {
            last.1 += jump;
            last.2 += kink;
        }
        _ => out.push((at, jump, kink)),
    };
    push(x[0], v[0], T::zero());
    let mut prev_slope = T::zero();
    for i in 0..n - 1 {
        let w = x[i + 1] - x[i];
        if w < tiny {
            push(x[i], v[i + 1] - v[i], T::zero());
        } else {
            let s = (v[i + 1] - v[i]) / w;
            push(x[i], T::zero(), s - prev_slope);
            prev_slope = s;
        }
    }
    push(x[n - 1], -v[n - 1], -prev_slope);
    out.retain(|e| e.1 != T::zero() || e.2 != T::zero());
    out
}

/// `H(2H-1) ∫∫ f(u) g(v) |u-v|^{2H-2} du dv` for the piecewise-linear
/// interpolants extended by zero, with `|f|, |g|` in
/// [`PairingMode::Absolute`]. `H = 1/2` gives the `L²` pairing.
///
/// Writing both functions as sums of steps and ramps, the form reduces to
/// closed-form pair terms in `|x_i - y_j|^{2H}`, `^{2H+1}` and `^{2H+2}`.
pub fn inner_product_h<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    hurst: HurstIndex<T>,
    mode: PairingMode,
) -> Result<T> {
    let h = hurst.value();
    if h < lit(0.5) {
        return Err(Error::UnsupportedKernelForm(h.as_f64()));
    }
    let (f, g) = match mode {
        PairingMode::Signed => (f.clone(), g.clone()),
        PairingMode::Absolute => (f.map(|_, v| v.abs())?, g.map(|_, v| v.abs())?),
    };
    let two_h = h + h;
    let half = lit::<T>(0.5);
    let c1 = half / (two_h + T::one());
    let c2 = c1 / (two_h + lit(2.0));
    let fs = steps_and_ramps(&f);
    let gs = steps_and_ramps(&g);
    let mut acc = T::zero();
    for &(x, jf, kf) in &fs {
        let mut row = T::zero();
        for &(y, jg, kg) in &gs {
            let r = x - y;
            let a = r.abs();
            let p0 = a.powf(two_h);
            let p1 = p0 * a;
            let sgn_p1 = if r < T::zero() { -p1 } else { p1 };
            row += -half * p0 * jf * jg - c1 * sgn_p1 * jf * kg + c1 * sgn_p1 * kf * jg + c2 * p1 * a * kf * kg;
        }
        acc += row;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frac::kernel::kernel_kh;
    use crate::quad::{integrate_both_singular, QuadConfig};
    use proptest::prelude::*;

    fn hh(v: f64) -> HurstIndex<f64> {
        HurstIndex::new(v).unwrap()
    }

    fn cov(h: f64, s: f64, t: f64) -> f64 {
        0.5 * (s.powf(2.0 * h) + t.powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
    }

    #[test]
    fn kh_of_one_matches_closed_form_and_pointwise_quadrature() {
        let hu = hh(0.75);
        let k = FbmKernel::new(hu).unwrap();
        let one = GridFunction::uniform(0.0, 1.0, 256, |_x: f64| 1.0).unwrap();
        let r = op_kh(&one, hu).unwrap();
        let c = k.constant() * gamma(0.25) * gamma(0.75) / 1.25;
        for (t, v) in r.points().iter().zip(r.samples()) {
            assert!((v - c * t.powf(1.25)).abs() < 2e-5, "t={t}: {v} vs {}", c * t.powf(1.25));
        }
        let direct = integrate_both_singular(|s: f64| kernel_kh(hu, 0.6, s).unwrap(), 0.0, 0.6, -0.25, 0.0, QuadConfig::rel(1e-9));
        assert!((direct.value - c * 0.6f64.powf(1.25)).abs() < 1e-7);
    }

    #[test]
    fn oh_of_one_is_a_power() {
        let hu = hh(0.75);
        let k = FbmKernel::new(hu).unwrap();
        let one = GridFunction::uniform(0.0, 1.0, 512, |_x: f64| 1.0).unwrap();
        let r = op_oh(&one, hu).unwrap();
        let c = k.constant() * gamma(0.25) * gamma(0.75);
        for (s, v) in r.points().iter().zip(r.samples()) {
            assert!((v - c * s.powf(0.25)).abs() < 1e-5);
        }
    }

    #[test]
    fn brownian_case_and_rejections() {
        let f = GridFunction::uniform(0.0, 1.0, 64, |x: f64| x.cos()).unwrap();
        let r = op_kh(&f, hh(0.5)).unwrap();
        assert_eq!(r, f.cumulative_integral().unwrap());
        assert!(matches!(op_kh(&f, hh(0.3)), Err(Error::UnsupportedKernelForm(_))));
        assert!(op_kh_inverse(&f, hh(0.75)).is_err());
        let zero = f.map(|_, _| 0.0).unwrap();
        assert_eq!(op_kh_inverse(&zero, hh(0.75)).unwrap().max_abs_diff(&zero), 0.0);
    }

    #[test]
    fn inner_product_reproduces_covariance() {
        let hu = hh(0.75);
        let one = GridFunction::indicator(0.0, 2.0, 256, 0.0, 1.0).unwrap();
        let two = GridFunction::indicator(0.0, 2.0, 256, 0.0, 2.0).unwrap();
        let v = inner_product_h(&one, &two, hu, PairingMode::Signed).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-9, "{v}");
        let lattice = [0.2, 0.37, 0.5, 0.81, 1.0];
        for &s in &lattice {
            for &t in &lattice {
                let f = GridFunction::indicator(0.0, 1.0, 512, 0.0, s).unwrap();
                let g = GridFunction::indicator(0.0, 1.0, 512, 0.0, t).unwrap();
                let v = inner_product_h(&f, &g, hu, PairingMode::Signed).unwrap();
                let exact = cov(0.75, s, t);
                assert!(((v - exact) / exact).abs() < 1e-4, "({s},{t}) {v} vs {exact}");
            }
        }
    }

    #[test]
    fn absolute_mode_dominates_signed() {
        let hu = hh(0.7);
        let f = GridFunction::uniform(0.0, 1.0, 256, |x: f64| (6.0 * x).sin()).unwrap();
        let signed = inner_product_h(&f, &f, hu, PairingMode::Signed).unwrap();
        let abs = inner_product_h(&f, &f, hu, PairingMode::Absolute).unwrap();
        assert!(signed > 0.0 && abs > signed);
    }

    #[test]
    fn defining_relation_and_round_trip_at_2048() {
        let hu = hh(0.75);
        let phi = GridFunction::uniform(0.0, 1.0, 2048, |x: f64| 1.0 + x * (3.0 * x).sin()).unwrap();
        let k = op_kh(&phi, hu).unwrap();
        let o = op_oh(&phi, hu).unwrap().cumulative_integral().unwrap();
        assert!(k.max_abs_diff(&o) < 1e-3, "{}", k.max_abs_diff(&o));

        let h = GridFunction::uniform(0.0, 1.0, 2048, |x: f64| (2.0 * std::f64::consts::PI * x).sin() + x * x).unwrap();
        let back = op_kh_inverse(&op_kh(&h, hu).unwrap(), hu).unwrap();
        assert!(back.max_abs_diff(&h) < 1e-3, "{}", back.max_abs_diff(&h));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn round_trip_for_random_smooth_h(hv in 0.55f64..0.95, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let hu = hh(hv);
            let h = GridFunction::uniform(0.0, 1.0, 512, |x: f64| a * x + b * x * x * (1.0 + x).ln()).unwrap();
            let back = op_kh_inverse(&op_kh(&h, hu).unwrap(), hu).unwrap();
            prop_assert!(back.max_abs_diff(&h) < 1e-3, "{}", back.max_abs_diff(&h));
        }

        #[test]
        fn pairing_is_symmetric(hv in 0.55f64..0.95, w in 0.5f64..5.0) {
            let hu = hh(hv);
            let f = GridFunction::uniform(0.0, 1.0, 128, |x: f64| (w * x).cos()).unwrap();
            let g = GridFunction::uniform(0.0, 1.0, 128, |x: f64| x * x - 0.3).unwrap();
            let a = inner_product_h(&f, &g, hu, PairingMode::Signed).unwrap();
            let b = inner_product_h(&g, &f, hu, PairingMode::Signed).unwrap();
            prop_assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()));
        }
    }
}
