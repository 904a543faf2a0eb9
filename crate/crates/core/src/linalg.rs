//! Small dense linear algebra: the matrices here are at most a few hundred
//! rows (covariances on a grid, regression normal equations).

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    pub lower: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        let n = a.n;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                let v = l.get(j, k);
                d -= v * v;
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: d.as_f64(),
                });
            }
            let djj = d.sqrt();
            l.set(j, j, djj);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(Self { lower: l })
    }

    /// `y = L z`.
    pub fn mul_lower(&self, z: &[T], out: &mut [T]) {
        let n = self.lower.n;
        for i in 0..n {
            let row = self.lower.row(i);
            let mut s = T::zero();
            for k in 0..=i {
                s += row[k] * z[k];
            }
            out[i] = s;
        }
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lower.n;
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l.get(i, k) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l.get(k, i) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        y
    }
}

/// Weighted least squares fit `y ≈ X β` with per-row weights; returns β and
/// `(Xᵀ W X)^{-1}`.
pub fn weighted_least_squares<T: Real>(
    design: &[Vec<T>],
    y: &[T],
    weights: &[T],
) -> Result<(Vec<T>, Matrix<T>)> {
    let p = design.first().map(|r| r.len()).unwrap_or(0);
    if p == 0 || design.len() < p {
        return Err(Error::Singular("least squares (too few rows)"));
    }
    let mut xtx: Matrix<T> = Matrix::zeros(p);
    let mut xty = vec![T::zero(); p];
    for ((row, &yi), &wi) in design.iter().zip(y).zip(weights) {
        for a in 0..p {
            xty[a] += wi * row[a] * yi;
            for b in 0..p {
                let v = xtx.get(a, b) + wi * row[a] * row[b];
                xtx.set(a, b, v);
            }
        }
    }
    // scale to unit diagonal for conditioning
    let scale: Vec<T> = (0..p).map(|i| xtx.get(i, i).sqrt()).collect();
    if scale.iter().any(|s| !(*s > T::zero())) {
        return Err(Error::Singular("least squares (zero column)"));
    }
    let scaled = Matrix::from_fn(p, |i, j| xtx.get(i, j) / (scale[i] * scale[j]));
    let chol = Cholesky::factor(&scaled).map_err(|_| Error::Singular("least squares"))?;
    let rhs: Vec<T> = xty.iter().zip(&scale).map(|(v, s)| *v / *s).collect();
    let beta: Vec<T> = chol.solve(&rhs).iter().zip(&scale).map(|(v, s)| *v / *s).collect();
    let mut inv = Matrix::zeros(p);
    for j in 0..p {
        let mut e = vec![T::zero(); p];
        e[j] = T::one();
        let col = chol.solve(&e);
        for i in 0..p {
            inv.set(i, j, col[i] / (scale[i] * scale[j]));
        }
    }
    Ok((beta, inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_roundtrip() {
        let a = Matrix::from_fn(3, |i, j| [[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]][i][j]);
        let c = Cholesky::factor(&a).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| a.get(i, j) * x[j]).sum();
            assert!((s - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_reports_pivot() {
        let a = Matrix::from_fn(3, |i, j| if i == j { 1.0 } else if i + j == 3 { 1.0 } else { 0.0 });
        match Cholesky::factor(&a) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn least_squares_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let design: Vec<Vec<f64>> = xs.iter().map(|x| vec![1.0, *x]).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (b, _) = weighted_least_squares(&design, &y, &[1.0; 4]).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] + 0.5).abs() < 1e-12);
    }
}
