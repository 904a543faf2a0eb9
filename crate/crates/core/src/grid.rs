//! Grids, grid functions and the bounded parameters (Hurst index, fractional
//! order, Hölder exponent) used throughout the crate.

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Real};

/// Hurst index `H ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstIndex<T>(T);

impl<T: Real> HurstIndex<T> {
    pub fn new(value: T) -> Result<Self> {
        if value > T::zero() && value < T::one() {
            Ok(Self(value))
        } else {
            Err(invalid("H", format!("must lie in (0,1), got {value}")))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// `H > 1/2`: the regime where `K_H`, `O_H` and Young calculus apply.
    #[inline]
    pub fn regular(self) -> bool {
        self.0 > lit(0.5)
    }

    #[inline]
    pub fn is_brownian(self) -> bool {
        self.0 == lit(0.5)
    }
}

/// Fractional order `α ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FracOrder<T>(T);

impl<T: Real> FracOrder<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if alpha > T::zero() && alpha <= T::one() {
            Ok(Self(alpha))
        } else {
            Err(invalid("alpha", format!("must lie in (0,1], got {alpha}")))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

/// Hölder exponent `μ ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HolderExponent<T>(T);

impl<T: Real> HolderExponent<T> {
    pub fn new(mu: T) -> Result<Self> {
        if mu > T::zero() && mu <= T::one() {
            Ok(Self(mu))
        } else {
            Err(invalid("mu", format!("must lie in (0,1], got {mu}")))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

/// Discretisation `0 = t_0 < t_1 < … < t_n = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    points: Vec<T>,
    uniform: bool,
}

impl<T: Real> TimeGrid<T> {
    pub fn uniform(horizon: T, n: usize) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if n == 0 {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        let dt = horizon / T::from_usize_lossy(n);
        let mut points: Vec<T> = (0..=n).map(|k| dt * T::from_usize_lossy(k)).collect();
        points[n] = horizon;
        Ok(Self {
            points,
            uniform: true,
        })
    }

    pub fn from_points(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid("need at least two points".into()));
        }
        if points[0] != T::zero() {
            return Err(Error::InvalidGrid(format!("first point must be 0, got {}", points[0])));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid(format!(
                "points must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let n = points.len() - 1;
        let dt = points[n] / T::from_usize_lossy(n);
        let uniform = points
            .iter()
            .enumerate()
            .all(|(k, p)| (*p - dt * T::from_usize_lossy(k)).abs() <= dt * lit(1e-9));
        Ok(Self { points, uniform })
    }

    #[inline]
    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Number of steps `n` (the grid has `n + 1` points).
    #[inline]
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    #[inline]
    pub fn horizon(&self) -> T {
        self.points[self.points.len() - 1]
    }

    pub fn mesh(&self) -> T {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), |a, b| a.max(b))
    }

    #[inline]
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Index of the grid point equal to `t` up to a relative tolerance.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let tol = self.mesh() * lit(1e-7);
        let pos = self.points.partition_point(|p| *p < t - tol);
        (pos < self.points.len() && (self.points[pos] - t).abs() <= tol).then_some(pos)
    }

    /// Sub-grid made of the given indices (must include 0, strictly increasing).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::from_points(indices.iter().map(|&i| self.points[i]).collect())
    }
}

/// Samples of a real function on strictly increasing points, interpolated
/// piecewise linearly. The domain `[a, b]` need not start at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    points: Vec<T>,
    samples: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(points: Vec<T>, samples: Vec<T>) -> Result<Self> {
        if points.len() != samples.len() {
            return Err(Error::InvalidGrid(format!(
                "{} points but {} samples",
                points.len(),
                samples.len()
            )));
        }
        if points.len() < 2 {
            return Err(Error::InvalidGrid("need at least two points".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("points must be strictly increasing".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { points, samples })
    }

    pub fn on_grid(grid: &TimeGrid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_fn(grid.points().to_vec(), f)
    }

    pub fn from_fn(points: Vec<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let samples = points.iter().map(|&x| f(x)).collect();
        Self::new(points, samples)
    }

    pub fn uniform(a: T, b: T, n: usize, f: impl Fn(T) -> T) -> Result<Self> {
        if !(b > a) || n == 0 {
            return Err(Error::InvalidGrid(format!("bad interval [{a}, {b}] with n={n}")));
        }
        let h = (b - a) / T::from_usize_lossy(n);
        let mut pts: Vec<T> = (0..=n).map(|k| a + h * T::from_usize_lossy(k)).collect();
        pts[n] = b;
        Self::from_fn(pts, f)
    }

    /// Indicator of `[lo, hi]` on a uniform `n`-cell grid over `[a, b]`.
    /// The jumps become linear ramps of relative width `ε^{3/4}`.
    pub fn indicator(a: T, b: T, n: usize, lo: T, hi: T) -> Result<Self> {
        let base = Self::uniform(a, b, n, |_| T::zero())?;
        let eps = (b - a) * T::epsilon().powf(lit(0.75));
        let mut pts = base.points;
        for extra in [lo - eps, lo, hi, hi + eps] {
            if extra >= a && extra <= b {
                pts.push(extra);
            }
        }
        pts.sort_by(|x, y| x.partial_cmp(y).expect("finite points"));
        pts.dedup_by(|x, y| (*x - *y).abs() < eps * lit(0.25));
        Self::from_fn(pts, |x| if x >= lo && x <= hi { T::one() } else { T::zero() })
    }

    #[inline]
    pub fn points(&self) -> &[T] {
        &self.points
    }

    #[inline]
    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn start(&self) -> T {
        self.points[0]
    }

    #[inline]
    pub fn end(&self) -> T {
        self.points[self.points.len() - 1]
    }

    pub fn map(&self, f: impl Fn(T, T) -> T) -> Result<Self> {
        let samples = self
            .points
            .iter()
            .zip(&self.samples)
            .map(|(&x, &v)| f(x, v))
            .collect();
        Self::new(self.points.clone(), samples)
    }

    pub fn with_samples(&self, samples: Vec<T>) -> Result<Self> {
        Self::new(self.points.clone(), samples)
    }

    /// Linear interpolation, constant extrapolation outside the domain.
    pub fn eval(&self, x: T) -> T {
        let n = self.points.len();
        if x <= self.points[0] {
            return self.samples[0];
        }
        if x >= self.points[n - 1] {
            return self.samples[n - 1];
        }
        let k = self.points.partition_point(|p| *p <= x) - 1;
        let (x0, x1) = (self.points[k], self.points[k + 1]);
        let w = (x - x0) / (x1 - x0);
        self.samples[k] * (T::one() - w) + self.samples[k + 1] * w
    }

    /// Grid derivative: centred differences inside, one-sided at the ends.
    pub fn derivative(&self) -> Result<Self> {
        let n = self.points.len();
        let p = &self.points;
        let v = &self.samples;
        let mut d = vec![T::zero(); n];
        if n == 2 {
            let slope = (v[1] - v[0]) / (p[1] - p[0]);
            return self.with_samples(vec![slope, slope]);
        }
        // three-point one-sided stencils at the ends
        let (h0, h1) = (p[1] - p[0], p[2] - p[1]);
        d[0] = -v[0] * (h0 + h0 + h1) / (h0 * (h0 + h1)) + v[1] * (h0 + h1) / (h0 * h1) - v[2] * h0 / (h1 * (h0 + h1));
        let (h0, h1) = (p[n - 2] - p[n - 3], p[n - 1] - p[n - 2]);
        d[n - 1] = v[n - 1] * (h1 + h1 + h0) / (h1 * (h1 + h0)) - v[n - 2] * (h1 + h0) / (h0 * h1)
            + v[n - 3] * h1 / (h0 * (h1 + h0));
        for k in 1..n - 1 {
            // second-order accurate on non-uniform grids
            let h0 = p[k] - p[k - 1];
            let h1 = p[k + 1] - p[k];
            d[k] = (v[k + 1] * h0 * h0 - v[k - 1] * h1 * h1 + v[k] * (h1 * h1 - h0 * h0))
                / (h0 * h1 * (h0 + h1));
        }
        self.with_samples(d)
    }

    /// Running trapezoid integral from the left endpoint (exact for the
    /// interpolant).
    pub fn cumulative_integral(&self) -> Result<Self> {
        let mut acc = T::zero();
        let mut out = Vec::with_capacity(self.len());
        out.push(T::zero());
        for k in 1..self.len() {
            acc += (self.samples[k] + self.samples[k - 1]) * lit(0.5) * (self.points[k] - self.points[k - 1]);
            out.push(acc);
        }
        self.with_samples(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Write two-column CSV `t,value` (CRLF records, 17 significant digits).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value\r\n");
        for (x, v) in self.points.iter().zip(&self.samples) {
            s.push_str(&format!("{},{}\r\n", sig17(x.as_f64()), sig17(v.as_f64())));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut pts = Vec::new();
        let mut vals = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('t')) {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<T> {
                s.and_then(|x| x.trim().parse::<f64>().ok())
                    .map(T::lit)
                    .ok_or_else(|| Error::Format(format!("line {}: expected `t,value`", lineno + 1)))
            };
            pts.push(parse(it.next())?);
            vals.push(parse(it.next())?);
        }
        Self::new(pts, vals)
    }
}


/// Scientific notation with 17 significant digits; round-trips any `f64`.
pub fn sig17(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}
