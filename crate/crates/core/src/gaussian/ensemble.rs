use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::Matrix;
use crate::scalar::Real;

/// `M` trajectories on a shared grid, row-major, optionally with the Brownian
/// increments that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble<T> {
    grid: TimeGrid<T>,
    n_paths: usize,
    values: Vec<T>,
    driver: Option<Vec<T>>,
    label: String,
}

impl<T: Real> PathEnsemble<T> {
    pub fn new(
        grid: TimeGrid<T>,
        n_paths: usize,
        values: Vec<T>,
        driver: Option<Vec<T>>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let width = grid.points().len();
        if n_paths == 0 {
            return Err(invalid("n_paths", "must be positive"));
        }
        if values.len() != n_paths * width {
            return Err(Error::Format(format!(
                "{} values for {n_paths} paths of {width} points",
                values.len()
            )));
        }
        if let Some(d) = &driver {
            if d.len() != n_paths * (width - 1) {
                return Err(Error::Format(format!(
                    "{} driver increments for {n_paths} paths of {} steps",
                    d.len(),
                    width - 1
                )));
            }
        }
        let x0 = values[0];
        if (0..n_paths).any(|j| values[j * width] != x0) {
            return Err(Error::Format("paths disagree on the initial value".into()));
        }
        Ok(Self {
            grid,
            n_paths,
            values,
            driver,
            label: label.into(),
        })
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.grid.points().len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn initial_value(&self) -> T {
        self.values[0]
    }

    #[inline]
    pub fn path(&self, j: usize) -> &[T] {
        let w = self.n_points();
        &self.values[j * w..(j + 1) * w]
    }

    #[inline]
    pub fn value(&self, j: usize, k: usize) -> T {
        self.values[j * self.n_points() + k]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn column(&self, k: usize) -> Vec<T> {
        (0..self.n_paths).map(|j| self.value(j, k)).collect()
    }

    pub fn has_driver(&self) -> bool {
        self.driver.is_some()
    }

    /// Increments `ΔW` of path `j` over the grid cells.
    pub fn driver_row(&self, j: usize) -> Option<&[T]> {
        let w = self.n_points() - 1;
        self.driver.as_ref().map(|d| &d[j * w..(j + 1) * w])
    }

    pub fn driver(&self) -> Option<&[T]> {
        self.driver.as_deref()
    }

    /// Same values with the driver dropped.
    pub fn without_driver(mut self) -> Self {
        self.driver = None;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Unbiased sample covariance of the columns at grid indices `idx`.
pub fn empirical_covariance_at<T: Real>(e: &PathEnsemble<T>, idx: &[usize]) -> Result<Matrix<T>> {
    if e.n_paths() < 2 {
        return Err(invalid("n_paths", "covariance needs at least two paths"));
    }
    if let Some(&bad) = idx.iter().find(|&&k| k >= e.n_points()) {
        return Err(invalid("times", format!("index {bad} outside the grid")));
    }
    let m = e.n_paths();
    let cols: Vec<Vec<T>> = idx.iter().map(|&k| e.column(k)).collect();
    let means: Vec<T> = cols
        .iter()
        .map(|c| c.iter().copied().sum::<T>() / T::from_usize_lossy(m))
        .collect();
    let denom = T::from_usize_lossy(m - 1);
    let p = idx.len();
    let mut out: Matrix<T> = Matrix::zeros(p);
    for a in 0..p {
        for b in a..p {
            let s: T = cols[a]
                .iter()
                .zip(&cols[b])
                .map(|(x, y)| (*x - means[a]) * (*y - means[b]))
                .sum();
            out.set(a, b, s / denom);
            out.set(b, a, s / denom);
        }
    }
    Ok(out)
}

/// [`empirical_covariance_at`] addressed by time; every time must be a grid point.
pub fn empirical_covariance<T: Real>(e: &PathEnsemble<T>, times: &[T]) -> Result<Matrix<T>> {
    let idx = times
        .iter()
        .map(|&t| {
            e.grid()
                .index_of(t)
                .ok_or_else(|| invalid("times", format!("{t} is not a grid point")))
        })
        .collect::<Result<Vec<_>>>()?;
    empirical_covariance_at(e, &idx)
}
