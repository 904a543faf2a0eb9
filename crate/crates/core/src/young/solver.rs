//! Pathwise solvers for `dX = σ(X) dB + b(X) dt` with `H > 1/2`, the
//! Malliavin derivative of the solution, and the `1/H`-variation statistic.

use serde::{Deserialize, Serialize};

use super::coefficients::CoefficientSet;
use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, HurstIndex, TimeGrid};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    DossSussmann,
    EulerYoung,
    MilsteinYoung,
    ProportionalFlow,
}

/// A solved trajectory with its driver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath<T> {
    pub grid: TimeGrid<T>,
    pub x: Vec<T>,
    pub driver: Vec<T>,
    /// The `A` component of `X = φ(A, B)` (Doss-Sussmann only).
    pub a: Option<Vec<T>>,
    pub flow_evaluations: usize,
    pub scheme: Scheme,
}

impl<T: Real> SolutionPath<T> {
    pub fn x_fn(&self) -> GridFunction<T> {
        GridFunction::new(self.grid.points().to_vec(), self.x.clone()).expect("finite solution")
    }

    pub fn driver_fn(&self) -> GridFunction<T> {
        GridFunction::new(self.grid.points().to_vec(), self.driver.clone()).expect("finite driver")
    }
}

const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// The flow `φ(x₁, ·)` of `y' = σ(y)` together with `∫_0^{x₂} σ'(φ(x₁, u)) du`.
pub struct Flow<'a, T> {
    c: &'a CoefficientSet<T>,
    tol: T,
    pub evaluations: usize,
}

impl<'a, T: Real> Flow<'a, T> {
    pub fn new(c: &'a CoefficientSet<T>) -> Self {
        Self {
            c,
            tol: lit(T::TOL_FLOOR * 100.0),
            evaluations: 0,
        }
    }

    fn rhs(&mut self, y: [T; 2]) -> [T; 2] {
        self.evaluations += 1;
        [(self.c.sigma)(y[0]), (self.c.sigma_prime)(y[0])]
    }

    /// `(φ(x₁, x₂), ∫_0^{x₂} σ'(φ(x₁, u)) du)` by adaptive Dormand-Prince 5(4).
    pub fn eval(&mut self, x1: T, x2: T) -> Result<(T, T)> {
        if x2 == T::zero() {
            return Ok((x1, T::zero()));
        }
        let mut y = [x1, T::zero()];
        let mut u = T::zero();
        let mut h = x2;
        let min_step = x2.abs() * lit(1e-13);
        let mut k = [[T::zero(); 2]; 7];
        k[0] = self.rhs(y);
        let mut steps = 0usize;
        while (x2 - u) * x2.signum() > T::zero() {
            if (u + h - x2) * x2.signum() > T::zero() {
                h = x2 - u;
            }
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = lit::<T>(DP_A[s - 1][j]);
                    ys[0] += h * a * kj[0];
                    ys[1] += h * a * kj[1];
                }
                k[s] = self.rhs(ys);
            }
            let mut y_new = y;
            for (j, kj) in k.iter().enumerate().take(6) {
                let b = lit::<T>(DP_A[5][j]);
                y_new[0] += h * b * kj[0];
                y_new[1] += h * b * kj[1];
            }
            let mut err = T::zero();
            for c in 0..2 {
                let e: T = (0..7).map(|j| lit::<T>(DP_E[j]) * k[j][c]).sum::<T>() * h;
                let sc = self.tol * (T::one() + y_new[c].abs().max(y[c].abs()));
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                return Err(Error::OdeFailure {
                    location: format!("flow from x1={x1} at u={u}"),
                    reason: "non-finite state".into(),
                });
            }
            if err <= T::one() {
                u += h;
                y = y_new;
                k[0] = k[6];
            }
            let factor = if err == T::zero() {
                lit(5.0)
            } else {
                (lit::<T>(0.9) * err.powf(lit(-0.2))).max(lit(0.2)).min(lit(5.0))
            };
            h *= factor;
            steps += 1;
            if h.abs() < min_step || steps > 100_000 {
                return Err(Error::OdeFailure {
                    location: format!("flow from x1={x1} towards x2={x2}, stopped at u={u}"),
                    reason: "step size underflow".into(),
                });
            }
        }
        Ok((y[0], y[1]))
    }
}

fn check_driver<T: Real>(grid: &TimeGrid<T>, driver: &[T]) -> Result<()> {
    if driver.len() != grid.points().len() {
        return Err(invalid(
            "driver",
            format!("{} driver values for {} grid points", driver.len(), grid.points().len()),
        ));
    }
    Ok(())
}

/// Doss-Sussmann: `X_t = φ(A_t, B_t)` with
/// `A' = exp(-∫_0^{B_t} σ'(φ(A, u)) du) b(φ(A, B_t))`, advanced by classical
/// RK4 in `t` with `B` linearly interpolated at half steps.
pub fn doss_sussmann_solve<T: Real>(c: &CoefficientSet<T>, grid: &TimeGrid<T>, driver: &[T]) -> Result<SolutionPath<T>> {
    check_driver(grid, driver)?;
    let mut flow = Flow::new(c);
    let half = lit::<T>(0.5);
    let t = grid.points();
    let n = t.len();
    let a0 = flow.eval(c.x0, -driver[0])?.0;
    let mut a = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    a.push(a0);
    let field = |flow: &mut Flow<'_, T>, av: T, bv: T| -> Result<(T, T)> {
        let (phi, j) = flow.eval(av, bv)?;
        Ok((phi, (-j).exp() * (c.b)(phi)))
    };
    for k in 0..n - 1 {
        let h = t[k + 1] - t[k];
        let bm = (driver[k] + driver[k + 1]) * half;
        let ak = a[k];
        let (xk, k1) = field(&mut flow, ak, driver[k])?;
        x.push(xk);
        let (_, k2) = field(&mut flow, ak + h * half * k1, bm)?;
        let (_, k3) = field(&mut flow, ak + h * half * k2, bm)?;
        let (_, k4) = field(&mut flow, ak + h * k3, driver[k + 1])?;
        let next = ak + h / lit(6.0) * (k1 + lit::<T>(2.0) * (k2 + k3) + k4);
        if !next.is_finite() {
            return Err(Error::OdeFailure {
                location: format!("A equation at t={}", t[k]),
                reason: "non-finite A".into(),
            });
        }
        a.push(next);
    }
    x.push(flow.eval(a[n - 1], driver[n - 1])?.0);
    x[0] = c.x0;
    Ok(SolutionPath {
        grid: grid.clone(),
        x,
        driver: driver.to_vec(),
        a: Some(a),
        flow_evaluations: flow.evaluations,
        scheme: Scheme::DossSussmann,
    })
}

pub(crate) const OVERFLOW: f64 = 1e12;

// Euler (plus the Milstein term when `second_order`) along `t`, writing into `x`.
pub(crate) fn explicit_steps<T: Real>(
    c: &CoefficientSet<T>,
    t: &[T],
    driver: &[T],
    second_order: bool,
    x: &mut Vec<T>,
) -> Result<()> {
    x.clear();
    let mut xk = c.x0;
    x.push(xk);
    let half = lit::<T>(0.5);
    for k in 0..t.len() - 1 {
        let db = driver[k + 1] - driver[k];
        let s = (c.sigma)(xk);
        let mut next = xk + s * db + (c.b)(xk) * (t[k + 1] - t[k]);
        if second_order {
            next += half * s * (c.sigma_prime)(xk) * db * db;
        }
        if !(next.abs() <= lit(OVERFLOW)) {
            return Err(Error::Overflow { step: k + 1 });
        }
        xk = next;
        x.push(xk);
    }
    Ok(())
}

fn explicit_scheme<T: Real>(
    c: &CoefficientSet<T>,
    grid: &TimeGrid<T>,
    driver: &[T],
    second_order: bool,
) -> Result<SolutionPath<T>> {
    check_driver(grid, driver)?;
    let mut x = Vec::with_capacity(driver.len());
    explicit_steps(c, grid.points(), driver, second_order, &mut x)?;
    Ok(SolutionPath {
        grid: grid.clone(),
        x,
        driver: driver.to_vec(),
        a: None,
        flow_evaluations: 0,
        scheme: if second_order { Scheme::MilsteinYoung } else { Scheme::EulerYoung },
    })
}

/// `X_{k+1} = X_k + σ(X_k) ΔB + b(X_k) Δt`.
pub fn euler_young_solve<T: Real>(c: &CoefficientSet<T>, grid: &TimeGrid<T>, driver: &[T]) -> Result<SolutionPath<T>> {
    explicit_scheme(c, grid, driver, false)
}

/// Euler plus the `σσ' ΔB²/2` correction.
pub fn milstein_young_solve<T: Real>(c: &CoefficientSet<T>, grid: &TimeGrid<T>, driver: &[T]) -> Result<SolutionPath<T>> {
    explicit_scheme(c, grid, driver, true)
}

/// For `b = rσ`: `X_t = f(B_t + r t)` with `f' = σ(f), f(0) = x0`, advanced
/// node to node through the flow property `f(y + Δ) = φ(f(y), Δ)`.
pub fn proportional_flow_solve<T: Real>(c: &CoefficientSet<T>, grid: &TimeGrid<T>, driver: &[T]) -> Result<SolutionPath<T>> {
    check_driver(grid, driver)?;
    let r = c
        .ratio()
        .ok_or_else(|| Error::Coefficients(format!("`{}` is not proportional (b = r sigma)", c.name)))?;
    let t = grid.points();
    let mut flow = Flow::new(c);
    let y: Vec<T> = t.iter().zip(driver).map(|(&tk, &bk)| bk + r * tk).collect();
    let mut x = Vec::with_capacity(t.len());
    let mut xk = flow.eval(c.x0, y[0])?.0;
    x.push(c.x0);
    for k in 1..t.len() {
        xk = flow.eval(xk, y[k] - y[k - 1])?.0;
        x.push(xk);
    }
    Ok(SolutionPath {
        grid: grid.clone(),
        x,
        driver: driver.to_vec(),
        a: None,
        flow_evaluations: flow.evaluations,
        scheme: Scheme::ProportionalFlow,
    })
}

/// `X_t - x0 - Σ σ(X) ΔB (left points) - ∫ b(X) ds (trapezoid)` at the final time.
pub fn young_residual<T: Real>(c: &CoefficientSet<T>, sol: &SolutionPath<T>) -> T {
    let t = sol.grid.points();
    let n = t.len();
    let mut acc = T::zero();
    for k in 0..n - 1 {
        let (x0, x1) = (sol.x[k], sol.x[k + 1]);
        acc += (c.sigma)(x0) * (sol.driver[k + 1] - sol.driver[k]);
        acc += ((c.b)(x0) + (c.b)(x1)) * lit(0.5) * (t[k + 1] - t[k]);
    }
    sol.x[n - 1] - c.x0 - acc
}

// Running exponent E(k) = ∫_0^{t_k} b'(X) du + ∫_0^{t_k} σ'(X) dB, trapezoid sums.
fn malliavin_exponent<T: Real>(c: &CoefficientSet<T>, sol: &SolutionPath<T>) -> Vec<T> {
    let t = sol.grid.points();
    let half = lit::<T>(0.5);
    let mut e = Vec::with_capacity(t.len());
    let mut acc = T::zero();
    e.push(acc);
    for k in 0..t.len() - 1 {
        let (x0, x1) = (sol.x[k], sol.x[k + 1]);
        acc += half * ((c.b_prime)(x0) + (c.b_prime)(x1)) * (t[k + 1] - t[k]);
        acc += half * ((c.sigma_prime)(x0) + (c.sigma_prime)(x1)) * (sol.driver[k + 1] - sol.driver[k]);
        e.push(acc);
    }
    e
}

/// `D_s X_t = σ(X_s) exp(∫_s^t b'(X_u) du + ∫_s^t σ'(X_u) dB_u)` for `s ≤ t`,
/// zero for `s > t`. Both times must be grid nodes.
pub fn malliavin_derivative_x<T: Real>(c: &CoefficientSet<T>, sol: &SolutionPath<T>, s: T, t: T) -> Result<T> {
    let node = |v: T| sol.grid.index_of(v).ok_or_else(|| invalid("time", format!("{v} is not a grid node")));
    let (si, ti) = (node(s)?, node(t)?);
    if si > ti {
        return Ok(T::zero());
    }
    let e = malliavin_exponent(c, sol);
    Ok((c.sigma)(sol.x[si]) * (e[ti] - e[si]).exp())
}

/// `u ↦ D_u X_t` at every node `u` (zero after `t`), in `O(n)`.
pub fn malliavin_row<T: Real>(c: &CoefficientSet<T>, sol: &SolutionPath<T>, t_index: usize) -> Vec<T> {
    let e = malliavin_exponent(c, sol);
    (0..sol.x.len())
        .map(|u| {
            if u > t_index {
                T::zero()
            } else {
                (c.sigma)(sol.x[u]) * (e[t_index] - e[u]).exp()
            }
        })
        .collect()
}

/// `Σ_{k<n} |u(t_k)|^{1/H} |B_{t_{k+1}} - B_{t_k}|^{1/H}` on `t_k = kT/n`.
pub fn variation_statistic<T: Real>(u: &GridFunction<T>, b: &GridFunction<T>, hurst: HurstIndex<T>, n: usize) -> Result<T> {
    if n == 0 {
        return Err(invalid("n", "partition needs at least one cell"));
    }
    let horizon = b.end();
    let p = T::one() / hurst.value();
    let step = horizon / T::from_usize_lossy(n);
    let mut acc = T::zero();
    let mut prev = b.eval(T::zero());
    for k in 0..n {
        let tk = step * T::from_usize_lossy(k);
        let next = b.eval(step * T::from_usize_lossy(k + 1));
        acc += u.eval(tk).abs().powf(p) * (next - prev).abs().powf(p);
        prev = next;
    }
    Ok(acc)
}
