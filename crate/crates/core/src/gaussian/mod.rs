//! Exact and fast sampling of fBm and Gaussian Volterra processes, and the
//! covariance utilities used as oracles elsewhere.

mod ensemble;
pub mod io;
pub(crate) mod samplers;

pub use ensemble::{empirical_covariance, empirical_covariance_at, PathEnsemble};
pub use samplers::{
    cholesky_sample, circulant_sample, circulant_sample_acov, volterra_covariance, volterra_sample, volterra_sample_at,
    Observation,
};

use crate::error::{invalid, Result};
use crate::grid::HurstIndex;
use crate::scalar::{lit, Real};

/// `R_H(s, t) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance<T: Real>(hurst: HurstIndex<T>, s: T, t: T) -> Result<T> {
    if s < T::zero() || t < T::zero() {
        return Err(invalid("time", format!("covariance needs s, t >= 0, got ({s}, {t})")));
    }
    let two_h = lit::<T>(2.0) * hurst.value();
    Ok(lit::<T>(0.5) * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// `Cov(B_{t+h} - B_t, B_{u+k} - B_u)` without forming the large
/// covariances that cancel: `(|u+k-t|^{2H} + |u-t-h|^{2H} - |u+k-t-h|^{2H} - |u-t|^{2H}) / 2`.
pub fn fbm_increment_covariance<T: Real>(hurst: HurstIndex<T>, t: T, h: T, u: T, k: T) -> T {
    let two_h = lit::<T>(2.0) * hurst.value();
    let p = |x: T| x.abs().powf(two_h);
    lit::<T>(0.5) * (p(u + k - t) + p(u - t - h) - p(u + k - t - h) - p(u - t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_examples() {
        let h = |v: f64| HurstIndex::new(v).unwrap();
        assert!((fbm_covariance(h(0.5), 1.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(h(0.75), 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(h(0.75), 1.0, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(fbm_covariance(h(0.75), -1.0, 2.0).is_err());
        let inc = fbm_increment_covariance(h(0.7), 0.3, 0.1, 0.3, 0.1);
        assert!((inc - 0.1f64.powf(1.4)).abs() < 1e-15);
        let direct = fbm_covariance(h(0.7), 0.5, 0.9).unwrap() - fbm_covariance(h(0.7), 0.5, 0.8).unwrap()
            - fbm_covariance(h(0.7), 0.4, 0.9).unwrap()
            + fbm_covariance(h(0.7), 0.4, 0.8).unwrap();
        assert!((fbm_increment_covariance(h(0.7), 0.4, 0.1, 0.8, 0.1) - direct).abs() < 1e-14);
    }
}
