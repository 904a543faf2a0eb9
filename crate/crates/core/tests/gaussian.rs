use fracnelson::frac::KernelSpec;
use fracnelson::gaussian::*;
use fracnelson::*;

fn h(v: f64) -> Hurst {
    HurstIndex::new(v).unwrap()
}

// Standard error of a sample covariance entry for Gaussian data.
fn cov_se(saa: f64, sbb: f64, sab: f64, m: usize) -> f64 {
    ((saa * sbb + sab * sab) / m as f64).sqrt()
}

#[test]
fn cholesky_three_points_within_clt_band() {
    let grid = Grid::from_points(vec![0.0, 0.3, 0.6, 1.0]).unwrap();
    let m = 40_000;
    let e = cholesky_sample(h(0.7), &grid, m, SeedSpec::new(101)).unwrap();
    let c = empirical_covariance_at(&e, &[1, 2, 3]).unwrap();
    let t = [0.3, 0.6, 1.0];
    for a in 0..3 {
        for b in 0..3 {
            let exact = fbm_covariance(h(0.7), t[a], t[b]).unwrap();
            assert!((c.get(a, b) - exact).abs() < 4.0 / (m as f64).sqrt());
            let se = cov_se(t[a].powf(1.4), t[b].powf(1.4), exact, m);
            assert!((c.get(a, b) - exact).abs() < 5.0 * se);
        }
    }
}

#[test]
fn circulant_increments_are_stationary_for_rough_h() {
    let grid = Grid::uniform(1.0, 512).unwrap();
    let m = 2000;
    let e = circulant_sample(h(0.3), &grid, m, SeedSpec::new(102), Observation::default()).unwrap();
    for lag in [1usize, 4, 32, 128] {
        let delta = lag as f64 / 512.0;
        let sq: Vec<f64> = (0..m)
            .flat_map(|j| {
                let p = e.path(j);
                (0..512 - lag).step_by(lag).map(move |k| (p[k + lag] - p[k]).powi(2))
            })
            .collect();
        let mean = sq.iter().sum::<f64>() / sq.len() as f64;
        let target = delta.powf(0.6);
        // increments within one path are correlated; use per-path means for the SE
        let per_path: Vec<f64> = sq.chunks(sq.len() / m).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let var = per_path.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let se = (var / m as f64).sqrt();
        assert!((mean - target).abs() < 5.0 * se, "lag {lag}: {mean} vs {target} (se {se})");
    }
}

// Two-sample Kolmogorov-Smirnov statistic.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn circulant_and_cholesky_marginals_agree() {
    let grid = Grid::uniform(1.0, 512).unwrap();
    let m = 10_000;
    let a = circulant_sample(h(0.7), &grid, m, SeedSpec::new(103), Observation::default()).unwrap();
    let b = cholesky_sample(h(0.7), &grid, m, SeedSpec::new(104)).unwrap();
    // Bonferroni over two time points at overall level 0.01
    let crit = 1.731 * (2.0 / m as f64).sqrt();
    for k in [256, 512] {
        let d = ks(a.column(k), b.column(k));
        assert!(d < crit, "t index {k}: KS {d} >= {crit}");
    }
}

#[test]
fn volterra_discretisation_converges_to_fbm_covariance() {
    let k = KernelSpec::fbm(h(0.7)).unwrap();
    let mut errs = Vec::new();
    for n in [16usize, 32, 64, 128] {
        let grid = Grid::uniform(1.0, n).unwrap();
        let c = volterra_covariance(&k, &grid).unwrap();
        let mut err = 0.0f64;
        for q in [n / 4, n / 2, n] {
            for r in [n / 4, n / 2, n] {
                let (s, t) = (q as f64 / n as f64, r as f64 / n as f64);
                err = err.max((c.get(q - 1, r - 1) - fbm_covariance(h(0.7), s, t).unwrap()).abs());
            }
        }
        errs.push(err);
    }
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] < 0.02, "{errs:?}");
}

#[test]
fn volterra_sample_variance_at_horizon() {
    let k = KernelSpec::fbm(h(0.7)).unwrap();
    let grid = Grid::uniform(1.0, 128).unwrap();
    let m = 20_000;
    let e = volterra_sample(&k, &grid, m, SeedSpec::new(105), Observation::every(32)).unwrap();
    let c = empirical_covariance_at(&e, &[4]).unwrap();
    let exact = volterra_covariance(&k, &grid).unwrap().get(127, 127);
    assert!((c.get(0, 0) - exact).abs() < 5.0 * exact * (2.0 / m as f64).sqrt());
    assert!((exact - 1.0).abs() < 0.02);
}

#[test]
fn empirical_covariance_of_constant_ensemble_is_zero() {
    let grid = Grid::uniform(1.0, 4).unwrap();
    let e = PathEnsemble::new(grid, 3, vec![1.0; 15], None, "const").unwrap();
    let c = empirical_covariance(&e, &[0.25, 1.0]).unwrap();
    assert!((0..2).all(|a| (0..2).all(|b| c.get(a, b) == 0.0)));
    assert!(empirical_covariance(&e, &[0.3]).is_err());
}

#[test]
fn f32_sampling_works() {
    let grid = TimeGrid::<f32>::uniform(1.0, 64).unwrap();
    let e = circulant_sample(HurstIndex::new(0.7f32).unwrap(), &grid, 500, SeedSpec::new(7), Observation::default()).unwrap();
    let v: f32 = e.column(64).iter().map(|x| x * x).sum::<f32>() / 500.0;
    assert!((v - 1.0).abs() < 0.25);
}
