//! Path-parallel SDE ensembles keeping a subset of the simulation nodes.

use std::sync::Mutex;

use rand_chacha::ChaCha8Rng;

use super::coefficients::CoefficientSet;
use super::solver::{doss_sussmann_solve, explicit_steps, Flow, Scheme, OVERFLOW};
use crate::error::{invalid, Error, Result};
use crate::gaussian::samplers::{check_keep, check_paths, fill_paths, CirculantPlan};
use crate::gaussian::PathEnsemble;
use crate::grid::{HurstIndex, TimeGrid};
use crate::rng::SeedSpec;
use crate::scalar::{lit, Real};

const RUN_SDE: u64 = 4;
const RUN_WIENER: u64 = 5;

fn first_error<T: Real>(slot: &Mutex<Option<Error>>, row: &mut [T], e: Error) {
    row.iter_mut().for_each(|v| *v = T::nan());
    let mut g = slot.lock().expect("error slot");
    if g.is_none() {
        *g = Some(e);
    }
}

fn keep_driver<T: Real>(full: &[T], keep: &[usize], out: Option<&mut [T]>) {
    if let Some(d) = out {
        for (c, slot) in d.iter_mut().enumerate() {
            *slot = full[keep[c + 1]] - full[keep[c]];
        }
    }
}

/// Fractional SDE `dX = σ(X) dB + b(X) dt` on a uniform grid, fBm driver by
/// circulant embedding, stored at the nodes `keep`. The driver field holds
/// the `B` increments between kept nodes.
pub fn sde_ensemble<T: Real>(
    c: &CoefficientSet<T>,
    hurst: HurstIndex<T>,
    grid: &TimeGrid<T>,
    keep: &[usize],
    n_paths: usize,
    seed: SeedSpec,
    scheme: Scheme,
) -> Result<PathEnsemble<T>> {
    check_paths(n_paths)?;
    check_keep(keep, grid)?;
    if !hurst.regular() {
        return Err(invalid("hurst", "fractional SDEs need H > 1/2"));
    }
    let plan = CirculantPlan::fbm(hurst, grid)?;
    let n = grid.steps();
    let t = grid.points();
    let failure = Mutex::new(None);
    let r = c.ratio();
    if scheme == Scheme::ProportionalFlow && r.is_none() {
        return Err(Error::Coefficients(format!("`{}` is not proportional (b = r sigma)", c.name)));
    }
    let fill = |rng: &mut ChaCha8Rng, row: &mut [T], drow: Option<&mut [T]>| {
        let mut b = vec![T::zero(); n + 1];
        plan.path(rng, &mut b);
        let mut x = Vec::with_capacity(n + 1);
        let solved = match scheme {
            Scheme::EulerYoung => explicit_steps(c, t, &b, false, &mut x),
            Scheme::MilsteinYoung => explicit_steps(c, t, &b, true, &mut x),
            Scheme::DossSussmann => doss_sussmann_solve(c, grid, &b).map(|s| x = s.x),
            Scheme::ProportionalFlow => flow_composition(c, r.unwrap_or_else(T::zero), keep.iter().map(|&k| (t[k], b[k])), &mut x),
        };
        if let Err(e) = solved {
            first_error(&failure, row, e);
            return;
        }
        if scheme == Scheme::ProportionalFlow {
            row.copy_from_slice(&x);
        } else {
            for (slot, &k) in row.iter_mut().zip(keep) {
                *slot = x[k];
            }
        }
        keep_driver(&b, keep, drow);
    };
    let (values, driver) = fill_paths(n_paths, keep.len(), true, seed, RUN_SDE, &fill);
    if let Some(e) = failure.into_inner().expect("error slot") {
        return Err(e);
    }
    PathEnsemble::new(
        grid.select(keep)?,
        n_paths,
        values,
        driver,
        format!("sde[{}](H={}, {:?})", c.name, hurst.value(), scheme),
    )
}

// X at successive (t, B_t) by exact flow steps along y = B_t + r t.
fn flow_composition<T: Real>(c: &CoefficientSet<T>, r: T, nodes: impl Iterator<Item = (T, T)>, x: &mut Vec<T>) -> Result<()> {
    let mut flow = Flow::new(c);
    x.clear();
    let mut prev_y = T::zero();
    let mut xk = c.x0;
    for (tk, bk) in nodes {
        let y = bk + r * tk;
        xk = flow.eval(xk, y - prev_y)?.0;
        prev_y = y;
        x.push(xk);
    }
    if let Some(first) = x.first_mut() {
        *first = c.x0;
    }
    Ok(())
}

/// Proportional case `b = rσ`: `X_t = f(B_t + r t)` path by path from an
/// ensemble of driver values `B` (for instance exact fBm on a few nodes).
pub fn proportional_ensemble<T: Real>(c: &CoefficientSet<T>, b: &PathEnsemble<T>) -> Result<PathEnsemble<T>> {
    let r = c
        .ratio()
        .ok_or_else(|| Error::Coefficients(format!("`{}` is not proportional (b = r sigma)", c.name)))?;
    let t = b.grid().points();
    let width = t.len();
    let failure = Mutex::new(None);
    let mut values = vec![T::zero(); b.n_paths() * width];
    let mut driver = vec![T::zero(); b.n_paths() * (width - 1)];
    {
        use rayon::prelude::*;
        values
            .par_chunks_mut(width)
            .zip(driver.par_chunks_mut(width - 1))
            .enumerate()
            .for_each(|(j, (row, drow))| {
                let bp = b.path(j);
                let mut x = Vec::with_capacity(width);
                match flow_composition(c, r, t.iter().copied().zip(bp.iter().copied()), &mut x) {
                    Ok(()) => row.copy_from_slice(&x),
                    Err(e) => first_error(&failure, row, e),
                }
                for (k, d) in drow.iter_mut().enumerate() {
                    *d = bp[k + 1] - bp[k];
                }
            });
    }
    if let Some(e) = failure.into_inner().expect("error slot") {
        return Err(e);
    }
    PathEnsemble::new(
        b.grid().clone(),
        b.n_paths(),
        values,
        Some(driver),
        format!("sde[{}] flow over {}", c.name, b.label()),
    )
}

/// Itô diffusion `dX = b(X) dt + σ(X) dW` by the Itô-Milstein scheme on a
/// grid, stored at `keep`; the driver holds `W` increments between kept nodes.
pub fn wiener_ensemble<T: Real>(
    c: &CoefficientSet<T>,
    grid: &TimeGrid<T>,
    keep: &[usize],
    n_paths: usize,
    seed: SeedSpec,
) -> Result<PathEnsemble<T>> {
    check_paths(n_paths)?;
    check_keep(keep, grid)?;
    let t = grid.points();
    let n = grid.steps();
    let half = lit::<T>(0.5);
    let failure = Mutex::new(None);
    let fill = |rng: &mut ChaCha8Rng, row: &mut [T], drow: Option<&mut [T]>| {
        let mut w = vec![T::zero(); n + 1];
        let mut x = c.x0;
        let mut next_keep = 0;
        for k in 0..=n {
            if k > 0 {
                let dt = t[k] - t[k - 1];
                let dw = dt.sqrt() * T::std_normal(rng);
                w[k] = w[k - 1] + dw;
                let s = (c.sigma)(x);
                x = x + (c.b)(x) * dt + s * dw + half * s * (c.sigma_prime)(x) * (dw * dw - dt);
                if !(x.abs() <= lit(OVERFLOW)) {
                    first_error(&failure, row, Error::Overflow { step: k });
                    return;
                }
            }
            if next_keep < keep.len() && keep[next_keep] == k {
                row[next_keep] = x;
                next_keep += 1;
            }
        }
        keep_driver(&w, keep, drow);
    };
    let (values, driver) = fill_paths(n_paths, keep.len(), true, seed, RUN_WIENER, &fill);
    if let Some(e) = failure.into_inner().expect("error slot") {
        return Err(e);
    }
    PathEnsemble::new(grid.select(keep)?, n_paths, values, driver, format!("wiener[{}]", c.name))
}
