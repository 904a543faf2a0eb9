use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{fbm_covariance, PathEnsemble};
use crate::error::{invalid, Error, Result};
use crate::frac::KernelSpec;
use crate::grid::{HurstIndex, TimeGrid};
use crate::linalg::{Cholesky, Matrix};
use crate::rng::SeedSpec;
use crate::scalar::{lit, Real};

const RUN_CHOLESKY: u64 = 1;
const RUN_CIRCULANT: u64 = 2;
const RUN_VOLTERRA: u64 = 3;

/// Which grid nodes are stored: every `stride`-th node of the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub stride: usize,
    pub keep_driver: bool,
}

impl Default for Observation {
    fn default() -> Self {
        Self {
            stride: 1,
            keep_driver: true,
        }
    }
}

impl Observation {
    pub fn every(stride: usize) -> Self {
        Self {
            stride,
            ..Self::default()
        }
    }

    pub fn indices<T: Real>(&self, grid: &TimeGrid<T>) -> Result<Vec<usize>> {
        let n = grid.steps();
        if self.stride == 0 || n % self.stride != 0 {
            return Err(invalid(
                "stride",
                format!("observation stride {} must divide the {n} grid steps", self.stride),
            ));
        }
        Ok((0..=n).step_by(self.stride).collect())
    }
}

pub(crate) type FillFn<'a, T> = dyn Fn(&mut ChaCha8Rng, &mut [T], Option<&mut [T]>) + Sync + 'a;

// Path-parallel generation; path j always draws from substream (run, j).
pub(crate) fn fill_paths<T: Real>(
    n_paths: usize,
    width: usize,
    with_driver: bool,
    seed: SeedSpec,
    run: u64,
    fill: &FillFn<'_, T>,
) -> (Vec<T>, Option<Vec<T>>) {
    let mut values = vec![T::zero(); n_paths * width];
    if with_driver {
        let mut driver = vec![T::zero(); n_paths * (width - 1)];
        values
            .par_chunks_mut(width)
            .zip(driver.par_chunks_mut(width - 1))
            .enumerate()
            .for_each(|(j, (row, drow))| {
                let mut rng = seed.path_rng(run, j as u64);
                fill(&mut rng, row, Some(drow));
            });
        (values, Some(driver))
    } else {
        values.par_chunks_mut(width).enumerate().for_each(|(j, row)| {
            let mut rng = seed.path_rng(run, j as u64);
            fill(&mut rng, row, None);
        });
        (values, None)
    }
}

pub(crate) fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(invalid("n_paths", "must be positive"));
    }
    Ok(())
}

/// Exact fBm on an arbitrary grid via the Cholesky factor of the covariance
/// of `(B_{t_1}, …, B_{t_n})`.
pub fn cholesky_sample<T: Real>(
    hurst: HurstIndex<T>,
    grid: &TimeGrid<T>,
    n_paths: usize,
    seed: SeedSpec,
) -> Result<PathEnsemble<T>> {
    check_paths(n_paths)?;
    let t = &grid.points()[1..];
    let n = t.len();
    let mut cov = Matrix::zeros(n);
    for a in 0..n {
        for b in 0..=a {
            let v = fbm_covariance(hurst, t[a], t[b])?;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    let chol = Cholesky::factor(&cov).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, value } => Error::NotPositiveDefinite { pivot: pivot + 1, value },
        other => other,
    })?;
    let fill = |rng: &mut ChaCha8Rng, row: &mut [T], _: Option<&mut [T]>| {
        let z: Vec<T> = (0..n).map(|_| T::std_normal(rng)).collect();
        chol.mul_lower(&z, &mut row[1..]);
    };
    let (values, _) = fill_paths(n_paths, n + 1, false, seed, RUN_CHOLESKY, &fill);
    PathEnsemble::new(grid.clone(), n_paths, values, None, format!("fbm(H={}) cholesky", hurst.value()))
}

/// Circulant embedding of a stationary increment sequence, reusable per path.
pub(crate) struct CirculantPlan<T: Real> {
    n: usize,
    lambda: Vec<T>,
    fft: std::sync::Arc<dyn rustfft::Fft<T>>,
}

impl<T: Real> CirculantPlan<T> {
    /// `acov[k] = Cov(X_1, X_{1+k})`, `k = 0..=n`; embedding of size `2n`.
    pub(crate) fn new(acov: &[T]) -> Result<Self> {
        let n = acov.len() - 1;
        let m = 2 * n;
        let mut c: Vec<Complex<T>> = (0..m)
            .map(|k| Complex::new(if k <= n { acov[k] } else { acov[m - k] }, T::zero()))
            .collect();
        let mut planner = FftPlanner::<T>::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut c);
        let top = c.iter().fold(T::zero(), |a, z| a.max(z.re.abs()));
        let tol = top * lit(1e-10);
        let mut lambda = Vec::with_capacity(m);
        for (k, z) in c.iter().enumerate() {
            if z.re < -tol {
                return Err(Error::NegativeEmbeddingEigenvalue {
                    index: k,
                    value: z.re.as_f64(),
                });
            }
            // rounding noise around zero only
            lambda.push((z.re.max(T::zero()) / T::from_usize_lossy(m)).sqrt());
        }
        Ok(Self { n, lambda, fft })
    }

    /// For fBm on a uniform grid of `n` steps.
    pub(crate) fn fbm(hurst: HurstIndex<T>, grid: &TimeGrid<T>) -> Result<Self> {
        if !grid.is_uniform() {
            return Err(Error::InvalidGrid("circulant embedding needs a uniform grid".into()));
        }
        let dt = grid.mesh();
        let two_h = lit::<T>(2.0) * hurst.value();
        let scale = dt.powf(two_h) * lit(0.5);
        let acov: Vec<T> = (0..=grid.steps())
            .map(|k| {
                let k = T::from_usize_lossy(k);
                scale * ((k + T::one()).powf(two_h) - lit::<T>(2.0) * k.powf(two_h) + (k - T::one()).abs().powf(two_h))
            })
            .collect();
        Self::new(&acov)
    }

    /// One path of partial sums `out[0] = 0, out[k] = X_1 + … + X_k`, `out.len() = n + 1`.
    pub(crate) fn path(&self, rng: &mut ChaCha8Rng, out: &mut [T]) {
        let mut buf: Vec<Complex<T>> = self
            .lambda
            .iter()
            .map(|&l| Complex::new(l * T::std_normal(rng), l * T::std_normal(rng)))
            .collect();
        self.fft.process(&mut buf);
        let mut acc = T::zero();
        out[0] = T::zero();
        for (k, z) in buf[..self.n].iter().enumerate() {
            acc += z.re;
            out[k + 1] = acc;
        }
    }
}

/// Stationary-increment sampler from the increment autocovariance
/// `acov[k] = Cov(X_1, X_{1+k})`, `k = 0..=n`, by circulant embedding of size `2n`.
pub fn circulant_sample_acov<T: Real>(
    acov: &[T],
    grid: &TimeGrid<T>,
    n_paths: usize,
    seed: SeedSpec,
    observation: Observation,
    label: impl Into<String>,
) -> Result<PathEnsemble<T>> {
    check_paths(n_paths)?;
    if !grid.is_uniform() {
        return Err(Error::InvalidGrid("circulant embedding needs a uniform grid".into()));
    }
    let n = grid.steps();
    if acov.len() != n + 1 {
        return Err(invalid("acov", format!("need {} lags, got {}", n + 1, acov.len())));
    }
    let obs = observation.indices(grid)?;
    let plan = CirculantPlan::new(acov)?;
    let stride = observation.stride;
    let fill = |rng: &mut ChaCha8Rng, row: &mut [T], _: Option<&mut [T]>| {
        let mut full = vec![T::zero(); n + 1];
        plan.path(rng, &mut full);
        for (slot, v) in row.iter_mut().zip(full.iter().step_by(stride)) {
            *slot = *v;
        }
    };
    let (values, _) = fill_paths(n_paths, obs.len(), false, seed, RUN_CIRCULANT, &fill);
    PathEnsemble::new(grid.select(&obs)?, n_paths, values, None, label)
}

/// Exact fBm on a uniform grid by circulant embedding of fractional Gaussian noise.
pub fn circulant_sample<T: Real>(
    hurst: HurstIndex<T>,
    grid: &TimeGrid<T>,
    n_paths: usize,
    seed: SeedSpec,
    observation: Observation,
) -> Result<PathEnsemble<T>> {
    check_paths(n_paths)?;
    let obs = observation.indices(grid)?;
    let plan = CirculantPlan::fbm(hurst, grid)?;
    let n = grid.steps();
    let stride = observation.stride;
    let fill = |rng: &mut ChaCha8Rng, row: &mut [T], _: Option<&mut [T]>| {
        let mut full = vec![T::zero(); n + 1];
        plan.path(rng, &mut full);
        for (slot, v) in row.iter_mut().zip(full.iter().step_by(stride)) {
            *slot = *v;
        }
    };
    let (values, _) = fill_paths(n_paths, obs.len(), false, seed, RUN_CIRCULANT, &fill);
    PathEnsemble::new(grid.select(&obs)?, n_paths, values, None, format!("fbm(H={}) circulant", hurst.value()))
}

// Row k holds K(t_k, m_j) for j < k, m_j the cell midpoints.
fn kernel_rows<T: Real>(kernel: &KernelSpec<T>, grid: &TimeGrid<T>, rows: &[usize]) -> Result<Vec<Vec<T>>> {
    let p = grid.points();
    let mids: Vec<T> = p.windows(2).map(|w| (w[0] + w[1]) * lit(0.5)).collect();
    rows.par_iter()
        .map(|&k| (0..k).map(|j| kernel.eval(p[k], mids[j])).collect::<Result<Vec<T>>>())
        .collect()
}

/// `G_{t_k} = Σ_{j<k} K(t_k, (s_j+s_{j+1})/2) ΔW_j`, keeping `ΔW` as the driver.
pub fn volterra_sample<T: Real>(
    kernel: &KernelSpec<T>,
    grid: &TimeGrid<T>,
    n_paths: usize,
    seed: SeedSpec,
    observation: Observation,
) -> Result<PathEnsemble<T>> {
    let obs = observation.indices(grid)?;
    volterra_sample_at(kernel, grid, &obs, n_paths, seed, observation.keep_driver)
}

/// As [`volterra_sample`], storing only the nodes `keep` (increasing, starting
/// at 0); the driver holds `W` increments between consecutive kept nodes.
pub fn volterra_sample_at<T: Real>(
    kernel: &KernelSpec<T>,
    grid: &TimeGrid<T>,
    keep: &[usize],
    n_paths: usize,
    seed: SeedSpec,
    keep_driver: bool,
) -> Result<PathEnsemble<T>> {
    check_paths(n_paths)?;
    check_keep(keep, grid)?;
    let rows = kernel_rows(kernel, grid, keep)?;
    let p = grid.points();
    let sd: Vec<T> = p.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
    let fill = |rng: &mut ChaCha8Rng, row: &mut [T], drow: Option<&mut [T]>| {
        let dw: Vec<T> = sd.iter().map(|&s| s * T::std_normal(rng)).collect();
        for (slot, kr) in row.iter_mut().zip(&rows) {
            *slot = kr.iter().zip(&dw).map(|(a, b)| *a * *b).sum();
        }
        if let Some(d) = drow {
            for (c, out) in d.iter_mut().enumerate() {
                *out = dw[keep[c]..keep[c + 1]].iter().copied().sum();
            }
        }
    };
    let (values, driver) = fill_paths(n_paths, keep.len(), keep_driver, seed, RUN_VOLTERRA, &fill);
    PathEnsemble::new(grid.select(keep)?, n_paths, values, driver, format!("volterra {}", kernel.description()))
}

pub(crate) fn check_keep<T: Real>(keep: &[usize], grid: &TimeGrid<T>) -> Result<()> {
    if keep.first() != Some(&0) || keep.windows(2).any(|w| w[1] <= w[0]) || keep.last().is_some_and(|&k| k > grid.steps()) {
        return Err(invalid("keep", "kept nodes must start at 0, increase strictly and stay on the grid"));
    }
    Ok(())
}

/// Exact covariance of the discretised Volterra process on `t_1..t_n`.
pub fn volterra_covariance<T: Real>(kernel: &KernelSpec<T>, grid: &TimeGrid<T>) -> Result<Matrix<T>> {
    let n = grid.steps();
    let idx: Vec<usize> = (1..=n).collect();
    let rows = kernel_rows(kernel, grid, &idx)?;
    let dt: Vec<T> = grid.points().windows(2).map(|w| w[1] - w[0]).collect();
    Ok(Matrix::from_fn(n, |a, b| {
        rows[a].iter().zip(&rows[b]).zip(&dt).map(|((x, y), d)| *x * *y * *d).sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::empirical_covariance_at;

    fn h(v: f64) -> HurstIndex<f64> {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn cholesky_reports_duplicate_point_pivot() {
        let grid = TimeGrid::from_points(vec![0.0, 0.5, 0.5 + 1e-15, 1.0]).unwrap();
        match cholesky_sample(h(0.7), &grid, 10, SeedSpec::new(1)) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn circulant_brownian_increments_have_mesh_variance() {
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let e = circulant_sample(h(0.5), &grid, 4000, SeedSpec::new(2), Observation::default()).unwrap();
        let c = empirical_covariance_at(&e, &[16, 32, 64]).unwrap();
        for (a, ta) in [0.25, 0.5, 1.0].iter().enumerate() {
            let se = ta * (2.0 / 4000f64).sqrt();
            assert!((c.get(a, a) - ta).abs() < 5.0 * se);
        }
    }

    #[test]
    fn negative_embedding_is_reported() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let acov = [1.0, 0.9, -0.9, 0.9, -0.9, 0.9, -0.9, 0.9, 0.9];
        let r = circulant_sample_acov(&acov, &grid, 2, SeedSpec::new(3), Observation::default(), "bad");
        assert!(matches!(r, Err(Error::NegativeEmbeddingEigenvalue { .. })));
    }

    #[test]
    fn indicator_kernel_gives_brownian_partial_sums() {
        let grid = TimeGrid::uniform(1.0, 32).unwrap();
        let k = KernelSpec::fbm(h(0.5)).unwrap();
        let e = volterra_sample(&k, &grid, 5, SeedSpec::new(4), Observation::default()).unwrap();
        for j in 0..5 {
            let d = e.driver_row(j).unwrap();
            let mut acc = 0.0;
            for (i, v) in e.path(j).iter().enumerate().skip(1) {
                acc += d[i - 1];
                assert!((v - acc).abs() < 1e-13);
            }
        }
        let th = KernelSpec::threshold(0.5, 1.0).unwrap();
        let g = volterra_sample(&th, &grid, 5, SeedSpec::new(4), Observation::default()).unwrap();
        for j in 0..5 {
            assert_eq!(&g.path(j)[..17], &e.path(j)[..17]);
        }
    }

    #[test]
    fn thinned_observation_keeps_aggregated_driver() {
        let grid = TimeGrid::uniform(1.0, 32).unwrap();
        let k = KernelSpec::fbm(h(0.5)).unwrap();
        let full = volterra_sample(&k, &grid, 3, SeedSpec::new(5), Observation::default()).unwrap();
        let thin = volterra_sample(&k, &grid, 3, SeedSpec::new(5), Observation::every(4)).unwrap();
        assert_eq!(thin.n_points(), 9);
        for j in 0..3 {
            for c in 0..9 {
                assert!((thin.value(j, c) - full.value(j, 4 * c)).abs() < 1e-13);
            }
            let s: f64 = thin.driver_row(j).unwrap().iter().sum();
            assert!((s - full.value(j, 32)).abs() < 1e-13);
        }
        assert!(volterra_sample(&k, &grid, 3, SeedSpec::new(5), Observation::every(5)).is_err());
    }

    #[test]
    fn deterministic_under_thread_count() {
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| circulant_sample(h(0.7), &grid, 50, SeedSpec::new(9), Observation::default()).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
