//! Existence of the past-forward derivative of Gaussian Volterra processes,
//! decided from the square integrability of the kernel's right `t`-derivative.

use std::cell::Cell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::frac::KernelSpec;
use crate::quad::{integrate, integrate_right_singular, QuadConfig};
use crate::scalar::{lit, Real};

/// δ-refinement schedule for [`volterra_criterion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementSchedule {
    /// `δ₀ = delta0_fraction · t`.
    pub delta0_fraction: f64,
    pub halvings: usize,
    /// Step of the one-sided difference used when no closed form exists.
    pub fd_step: f64,
    /// Shell ratio at or above which a step counts towards divergence.
    pub divergence_ratio: f64,
    /// Shell ratio at or below which a step counts towards convergence.
    pub convergence_ratio: f64,
    /// Consecutive final steps that must agree.
    pub window: usize,
    /// Uniform steps on `[0, t]` of the returned functional.
    pub functional_steps: usize,
}

impl Default for RefinementSchedule {
    fn default() -> Self {
        Self {
            delta0_fraction: 0.25,
            halvings: 30,
            fd_step: 1e-5,
            divergence_ratio: 1.0,
            convergence_ratio: 0.9,
            window: 3,
            functional_steps: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelVerdict {
    Convergent,
    Divergent,
    /// The derivative is not finite at `(t, s)`.
    DivergentSingularity { t: f64, s: f64 },
    Inconclusive,
}

impl KernelVerdict {
    pub fn is_divergent(self) -> bool {
        matches!(self, Self::Divergent | Self::DivergentSingularity { .. })
    }
}

/// `W ↦ Σ_j ∂⁺K/∂t(t, s_j*) ΔW_j` on a uniform grid of `[0, t]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeFunctional<T> {
    pub t: T,
    /// Midpoints `s_j*`.
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> DerivativeFunctional<T> {
    /// Applies the functional to Brownian increments over the uniform grid.
    pub fn apply(&self, dw: &[T]) -> Result<T> {
        if dw.len() != self.weights.len() {
            return Err(invalid(
                "increments",
                format!("expected {} increments, got {}", self.weights.len(), dw.len()),
            ));
        }
        Ok(self.weights.iter().zip(dw).map(|(a, b)| *a * *b).sum())
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| *w == T::zero())
    }

    /// `Σ w_j² Δs`, the variance of the functional under Brownian increments.
    pub fn variance(&self) -> T {
        let ds = self.t / T::from_usize_lossy(self.weights.len());
        self.weights.iter().map(|w| *w * *w).sum::<T>() * ds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport<T> {
    pub t: T,
    pub verdict: KernelVerdict,
    /// `δ_0, δ_1, …`
    pub deltas: Vec<T>,
    /// `S_m = ∫_{t-δ_{m-1}}^{t-δ_m} (∂⁺K/∂t)² ds`, `m ≥ 1`.
    pub shells: Vec<T>,
    /// `I_m = ∫_0^{t-δ_m} (∂⁺K/∂t)² ds`.
    pub cumulative: Vec<T>,
    /// `S_{m+1} / S_m`.
    pub shell_ratios: Vec<T>,
    /// `I_{m+1} / I_m`.
    pub growth_ratios: Vec<T>,
    pub functional: Option<DerivativeFunctional<T>>,
}

fn ratio<T: Real>(a: T, b: T) -> T {
    if b > T::zero() {
        a / b
    } else if a > T::zero() {
        T::infinity()
    } else {
        T::zero()
    }
}

/// Integrates the squared right derivative over shells approaching the
/// diagonal and classifies by the shell ratios.
pub fn volterra_criterion<T: Real>(
    kernel: &KernelSpec<T>,
    t: T,
    schedule: &RefinementSchedule,
) -> Result<CriterionReport<T>> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(invalid("t", format!("must be positive, got {t}")));
    }
    if !(schedule.delta0_fraction > 0.0 && schedule.delta0_fraction < 1.0) || schedule.window == 0 {
        return Err(invalid("schedule", "delta0_fraction must lie in (0, 1) and window be positive"));
    }
    let fd: T = lit(schedule.fd_step);
    let closed = kernel.closed_form_right_dt(t, t * lit(0.5)).is_some();
    let singular: Cell<Option<(f64, f64)>> = Cell::new(None);
    let d2 = |x: T| -> T {
        let s = t - x;
        if !(s > T::zero()) {
            return T::zero();
        }
        match kernel.right_dt(t, s, fd) {
            Ok(v) if v.is_finite() => v * v,
            Ok(_) | Err(Error::NonFiniteKernel { .. }) => {
                if singular.get().is_none() {
                    singular.set(Some((t.as_f64(), s.as_f64())));
                }
                T::zero()
            }
            Err(_) => T::zero(),
        }
    };
    let cfg = QuadConfig::rel(1e-9);
    let delta0 = t * lit(schedule.delta0_fraction);
    // x = t - s; the far end x = t (s = 0) may carry an integrable singularity
    let base = integrate_right_singular(&d2, delta0, t, lit(-0.5), cfg).value;
    let mut deltas = vec![delta0];
    let mut shells = Vec::new();
    let mut cumulative = vec![base];
    for _ in 0..schedule.halvings {
        let prev = *deltas.last().expect("non-empty");
        let next = prev * lit(0.5);
        if !closed && next < fd * lit(10.0) {
            break;
        }
        let s = integrate(&d2, next, prev, cfg).value;
        deltas.push(next);
        shells.push(s);
        cumulative.push(*cumulative.last().expect("non-empty") + s);
    }
    let shell_ratios: Vec<T> = shells.windows(2).map(|w| ratio(w[1], w[0])).collect();
    let growth_ratios: Vec<T> = cumulative.windows(2).map(|w| ratio(w[1], w[0])).collect();
    let verdict = if let Some((ts, ss)) = singular.get() {
        KernelVerdict::DivergentSingularity { t: ts, s: ss }
    } else if shells.iter().all(|s| *s == T::zero()) {
        KernelVerdict::Convergent
    } else if shell_ratios.len() < schedule.window {
        KernelVerdict::Inconclusive
    } else {
        let tail = &shell_ratios[shell_ratios.len() - schedule.window..];
        if tail.iter().all(|r| r.as_f64() >= schedule.divergence_ratio) {
            KernelVerdict::Divergent
        } else if tail.iter().all(|r| r.as_f64() <= schedule.convergence_ratio) {
            KernelVerdict::Convergent
        } else {
            KernelVerdict::Inconclusive
        }
    };
    let functional = if verdict == KernelVerdict::Convergent {
        let n = schedule.functional_steps.max(1);
        let ds = t / T::from_usize_lossy(n);
        let nodes: Vec<T> = (0..n).map(|j| ds * (T::from_usize_lossy(j) + lit(0.5))).collect();
        let weights = nodes
            .iter()
            .map(|&s| kernel.right_dt(t, s, fd))
            .collect::<Result<Vec<T>>>()?;
        Some(DerivativeFunctional { t, nodes, weights })
    } else {
        None
    };
    Ok(CriterionReport {
        t,
        verdict,
        deltas,
        shells,
        cumulative,
        shell_ratios,
        growth_ratios,
        functional,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiReport<T> {
    /// Mesh-weighted measure of the times with a convergent verdict.
    pub value: T,
    pub mesh: T,
    pub times: Vec<T>,
    pub verdicts: Vec<KernelVerdict>,
    pub convergent: usize,
    pub divergent: usize,
    pub inconclusive: usize,
}

/// Lebesgue measure of `{t ∈ [0, T] : the derivative exists}` on the
/// midpoint lattice `(i + 1/2) T / n`.
pub fn xi_statistic<T: Real>(
    kernel: &KernelSpec<T>,
    horizon: T,
    lattice: usize,
    schedule: &RefinementSchedule,
) -> Result<XiReport<T>> {
    if lattice == 0 || !(horizon > T::zero()) {
        return Err(invalid("lattice", "needs a positive horizon and at least one point"));
    }
    let mesh = horizon / T::from_usize_lossy(lattice);
    let times: Vec<T> = (0..lattice).map(|i| mesh * (T::from_usize_lossy(i) + lit(0.5))).collect();
    let verdicts = times
        .par_iter()
        .map(|&t| volterra_criterion(kernel, t, schedule).map(|r| r.verdict))
        .collect::<Result<Vec<_>>>()?;
    let convergent = verdicts.iter().filter(|v| **v == KernelVerdict::Convergent).count();
    let divergent = verdicts.iter().filter(|v| v.is_divergent()).count();
    Ok(XiReport {
        value: mesh * T::from_usize_lossy(convergent),
        mesh,
        times,
        inconclusive: lattice - convergent - divergent,
        verdicts,
        convergent,
        divergent,
    })
}
