use fracnelson::gaussian::{circulant_sample, Observation};
use fracnelson::young::*;
use fracnelson::{GridFunction, HolderExponent, HurstIndex, SeedSpec, TimeGrid};

fn hurst(h: f64) -> HurstIndex<f64> {
    HurstIndex::new(h).unwrap()
}

fn mu(v: f64) -> HolderExponent<f64> {
    HolderExponent::new(v).unwrap()
}

fn fbm(h: f64, n: usize, paths: usize, seed: u64) -> (TimeGrid<f64>, Vec<Vec<f64>>) {
    let grid = TimeGrid::uniform(1.0, n).unwrap();
    let e = circulant_sample(hurst(h), &grid, paths, SeedSpec::new(seed), Observation::default()).unwrap();
    let rows = (0..paths).map(|j| e.path(j).to_vec()).collect();
    (grid, rows)
}

fn coarsen(grid: &TimeGrid<f64>, b: &[f64], stride: usize) -> (TimeGrid<f64>, Vec<f64>) {
    let idx: Vec<usize> = (0..grid.points().len()).step_by(stride).collect();
    (grid.select(&idx).unwrap(), idx.iter().map(|&i| b[i]).collect())
}

#[test]
fn exponential_closed_form_at_1024() {
    let (grid, b) = fbm(0.75, 1024, 1, 11);
    let sol = doss_sussmann_solve(&CoefficientSet::linear(1.0), &grid, &b[0]).unwrap();
    let err = sol.x.iter().zip(&b[0]).map(|(x, bv)| (x - bv.exp()).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-6, "max error {err}");
    assert_eq!(sol.x[0], 1.0);
}

#[test]
fn young_residual_decreases_under_refinement() {
    let (fine, b) = fbm(0.75, 2048, 1, 12);
    for c in [CoefficientSet::sine(0.3), CoefficientSet::linear(1.0), CoefficientSet::proportional(0.5, 0.0)] {
        let res: Vec<f64> = [8, 4, 2, 1]
            .iter()
            .map(|&s| {
                let (g, bb) = coarsen(&fine, &b[0], s);
                young_residual(&c, &doss_sussmann_solve(&c, &g, &bb).unwrap()).abs()
            })
            .collect();
        assert!(res.windows(2).all(|w| w[1] < w[0]), "{}: {res:?}", c.name);
    }
}

#[test]
fn euler_agreement_slope() {
    let h = 0.75;
    let (fine, b) = fbm(h, 4096, 8, 13);
    let c = CoefficientSet::sine(0.3);
    let strides = [32usize, 16, 8, 4];
    let mut log_err = vec![0.0; strides.len()];
    for row in &b {
        for (i, &s) in strides.iter().enumerate() {
            let (g, bb) = coarsen(&fine, row, s);
            let ds = doss_sussmann_solve(&c, &g, &bb).unwrap();
            let eu = euler_young_solve(&c, &g, &bb).unwrap();
            let e = ds.x.iter().zip(&eu.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            log_err[i] += e.ln() / b.len() as f64;
        }
    }
    let log_mesh: Vec<f64> = strides.iter().map(|&s| (s as f64 / 4096.0).ln()).collect();
    let slope = ols_slope(&log_mesh, &log_err);
    assert!((slope - (2.0 * h - 1.0)).abs() <= 0.3, "slope {slope}");
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[test]
fn malliavin_bump_consistency() {
    let n = 2048;
    let (grid, b) = fbm(0.75, n, 1, 14);
    let c = CoefficientSet::sine(0.0);
    let (s, t) = (0.25, 0.75);
    let (si, ti) = (grid.index_of(s).unwrap(), grid.index_of(t).unwrap());
    let base = doss_sussmann_solve(&c, &grid, &b[0]).unwrap();
    let row = malliavin_row(&c, &base, ti);
    let pts = grid.points();
    let closed: f64 = (si..ti).map(|k| 0.5 * (row[k] + row[k + 1]) * (pts[k + 1] - pts[k])).sum();
    for eps in [1e-2, 1e-3, 1e-4] {
        let bumped: Vec<f64> = pts.iter().zip(&b[0]).map(|(&u, &bv)| bv + eps * (u.min(t) - s).max(0.0)).collect();
        let x = doss_sussmann_solve(&c, &grid, &bumped).unwrap();
        let fd = (x.x[ti] - base.x[ti]) / eps;
        let rel = (fd - closed).abs() / closed.abs();
        if eps == 1e-4 {
            assert!(rel < 0.01, "eps {eps}: fd {fd} closed {closed}");
        }
    }
    let single = malliavin_derivative_x(&c, &base, 0.5, t).unwrap();
    assert!((single - row[grid.index_of(0.5).unwrap()]).abs() < 1e-14);
}

#[test]
fn proportional_closed_form() {
    let (grid, b) = fbm(0.7, 1024, 1, 15);
    let r = 0.5;
    let c = CoefficientSet::proportional(r, 0.4);
    let ds = doss_sussmann_solve(&c, &grid, &b[0]).unwrap();
    // f' = σ(f), f(0) = x0, by an independent fixed-step RK4 on a fine lattice
    let sigma = |x: f64| 2.0 + x.sin();
    let f = |y: f64| {
        let steps = 4000;
        let h = y / steps as f64;
        let mut v = 0.4;
        for _ in 0..steps {
            let k1 = sigma(v);
            let k2 = sigma(v + 0.5 * h * k1);
            let k3 = sigma(v + 0.5 * h * k2);
            let k4 = sigma(v + h * k3);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        v
    };
    for k in (0..=1024).step_by(64) {
        let t = grid.points()[k];
        assert!((ds.x[k] - f(b[0][k] + r * t)).abs() < 1e-6, "t={t}");
    }
}

#[test]
fn holder_norms_of_fbm() {
    let (fine, b) = fbm(0.7, 4096, 1, 16);
    let norms = |m: f64| -> Vec<f64> {
        [16, 4, 1]
            .iter()
            .map(|&s| {
                let (g, bb) = coarsen(&fine, &b[0], s);
                holder_norm(&GridFunction::new(g.points().to_vec(), bb).unwrap(), mu(m), HolderMode::Exact)
            })
            .collect()
    };
    let rough = norms(0.75);
    assert!(rough.windows(2).all(|w| w[1] > w[0]), "{rough:?}");
    let smooth = norms(0.65);
    assert!(smooth.iter().all(|v| v.is_finite()));
    assert!(smooth[2] / smooth[0] < rough[2] / rough[0]);
}

#[test]
fn bound_constant_is_stable() {
    // κ is a constant of the inequality, so take the worst case over several paths
    let (fine, b) = fbm(0.7, 4096, 4, 17);
    let times: Vec<(f64, f64)> = (0..8).flat_map(|i| (i + 1..=8).map(move |j| (i as f64 / 8.0, j as f64 / 8.0))).collect();
    let kappas: Vec<f64> = [4, 2, 1]
        .iter()
        .map(|&s| {
            b.iter()
                .map(|row| {
                    let (g, bb) = coarsen(&fine, row, s);
                    let f = GridFunction::new(g.points().to_vec(), bb).unwrap();
                    let pairs: Vec<(usize, usize)> =
                        times.iter().map(|&(a, c)| (g.index_of(a).unwrap(), g.index_of(c).unwrap())).collect();
                    young_bound_check(&f, &f, mu(0.65), mu(0.65), &pairs).unwrap().kappa
                })
                .fold(0.0, f64::max)
        })
        .collect();
    for w in kappas.windows(2) {
        assert!((w[1] / w[0] - 1.0).abs() < 0.2, "{kappas:?}");
    }
    let sine = GridFunction::uniform(0.0, 1.0, 512, |x: f64| (6.0 * x).sin()).unwrap();
    let r = young_bound_check(&sine, &sine, mu(1.0), mu(1.0), &[(0, 100), (10, 500), (200, 300)]).unwrap();
    assert!(r.kappa.is_finite() && r.kappa < 1.0);
}

#[test]
fn fractional_evaluator_matches_riemann_on_fbm() {
    let (grid, b) = fbm(0.75, 4096, 2, 18);
    let f = GridFunction::new(grid.points().to_vec(), b[0].clone()).unwrap();
    let g = GridFunction::new(grid.points().to_vec(), b[1].clone()).unwrap();
    let frac = young_fractional(&f, &g, mu(0.7), mu(0.7), Some(0.5)).unwrap();
    let riem = *young_riemann(&f, &g).unwrap().samples().last().unwrap();
    assert!((frac - riem).abs() <= 1e-2 * riem.abs(), "{frac} vs {riem}");
}

#[test]
fn variation_statistic_limits() {
    // H = 1/2: Σ (ΔW)² has mean T exactly
    let (grid, b) = fbm(0.5, 4096, 1, 19);
    let bf = GridFunction::new(grid.points().to_vec(), b[0].clone()).unwrap();
    let one = bf.map(|_, _| 1.0).unwrap();
    let v = variation_statistic(&one, &bf, hurst(0.5), 4096).unwrap();
    // sd of Σ (ΔW)² is sqrt(2/n)
    assert!((v - 1.0).abs() < 3.0 * (2.0f64 / 4096.0).sqrt(), "{v}");
}
