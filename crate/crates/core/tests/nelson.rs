use fracnelson::nelson::*;
use fracnelson::young::{CoefficientSet, Scheme};
use fracnelson::nelson::BinRule;
use fracnelson::{HurstIndex, SeedSpec};

fn hurst(h: f64) -> HurstIndex<f64> {
    HurstIndex::new(h).unwrap()
}

fn params(n_paths: usize, seed: u64, horizon: f64) -> EnsembleParams<f64> {
    EnsembleParams {
        n_paths,
        seed: SeedSpec::new(seed),
        horizon,
    }
}

#[test]
fn fbm_present_derivative_matches_closed_form() {
    let h = 0.7;
    let process = ProcessConfig::Fbm { hurst: hurst(h) };
    let ladder = HLadder::new(vec![0.2, 0.1, 0.05], Direction::Symmetric).unwrap();
    let r = estimate_derivative(
        &process,
        SigmaFieldPlan::Present,
        1.0,
        &ladder,
        &params(100_000, 21, 1.2),
        &VerdictConfig::default(),
    )
    .unwrap();
    let l2 = report_relative_l2(&r, |x| h * x).unwrap();
    println!("verdict {:?} l2 {l2} gap {} tol {}", r.verdict, r.cauchy_gap, r.cauchy_tolerance);
    assert!(l2 <= 0.05, "relative L2 {l2}");
    assert_eq!(r.verdict, Verdict::Convergent);
    assert!(r.nondegenerate);
}

#[test]
fn exact_and_monte_carlo_slopes_agree() {
    for (i, h) in [0.6, 0.7, 0.8].into_iter().enumerate() {
        let process = ProcessConfig::Fbm { hurst: hurst(h) };
        let steps = [0.1, 0.05, 0.02, 0.01];
        let mut times = vec![1.0];
        times.extend(steps.iter().map(|s| 1.0 + s));
        let e = process.sample(&times, &params(100_000, 30 + i as u64, 1.2)).unwrap();
        for &s in &steps {
            let est = regress_conditional(&e, 1.0, s, Direction::Forward, &SigmaFieldSpec::present(1.0)).unwrap();
            let exact = gaussian_conditional_increment(hurst(h), 1.0, s, Direction::Forward, &[1.0]).unwrap();
            let z = (est.coefficients[1] - exact.coefficients[0]) / est.coefficient_se[1];
            println!("H={h} h={s} mc {} exact {} z {z}", est.coefficients[1], exact.coefficients[0]);
            assert!(z.abs() <= 3.0, "H={h} h={s} z={z}");
        }
    }
}

#[test]
fn forward_and_backward_limits_agree() {
    let h = 0.7;
    let process = ProcessConfig::Fbm { hurst: hurst(h) };
    let steps = vec![0.2, 0.1, 0.05, 0.025];
    let mut slopes = Vec::new();
    for dir in [Direction::Forward, Direction::Backward] {
        let ladder = HLadder::new(steps.clone(), dir).unwrap();
        let r = estimate_derivative(
            &process,
            SigmaFieldPlan::Present,
            1.0,
            &ladder,
            &params(100_000, 40, 1.2),
            &VerdictConfig::default(),
        )
        .unwrap();
        let l = r.limit.unwrap();
        slopes.push((l.coefficients[1], l.coefficient_se[1]));
    }
    let (a, sa) = slopes[0];
    let (b, sb) = slopes[1];
    let band = 3.0 * (sa * sa + sb * sb).sqrt();
    println!("forward {a}±{sa} backward {b}±{sb}");
    assert!((a - b).abs() <= band, "forward {a} backward {b} band {band}");
    assert!((a - h).abs() <= 3.0 * sa && (b - h).abs() <= 3.0 * sb);
}

#[test]
fn even_conditioning_is_null_and_degenerate() {
    let process = ProcessConfig::Fbm { hurst: hurst(0.7) };
    let ladder = HLadder::new(vec![0.2, 0.1, 0.05], Direction::Symmetric).unwrap();
    let r = estimate_derivative(
        &process,
        SigmaFieldPlan::Even,
        1.0,
        &ladder,
        &params(100_000, 50, 1.2),
        &VerdictConfig::default(),
    )
    .unwrap();
    let l = r.limit.as_ref().unwrap();
    for b in l.bins.iter().filter(|b| !b.excluded) {
        assert!(b.estimate.abs() <= 3.0 * b.se + 1e-12, "bin at {} gives {} ± {}", b.center, b.estimate, b.se);
    }
    assert!(!r.nondegenerate);
    assert_eq!(r.verdict, Verdict::Convergent);
}

#[test]
fn degeneracy_detector() {
    let det = ProcessConfig::Deterministic {
        label: "t^2".into(),
        f: std::sync::Arc::new(|t: f64| t * t),
    };
    let ladder = HLadder::new(vec![0.1, 0.05, 0.025], Direction::Forward).unwrap();
    let cfg = VerdictConfig::default();
    let r = estimate_derivative(&det, SigmaFieldPlan::Present, 0.5, &ladder, &params(200, 1, 1.0), &cfg).unwrap();
    assert!(!r.nondegenerate);
    assert!((r.levels[0].coefficients[0] - 1.1).abs() < 1e-12);
    let fbm = ProcessConfig::Fbm { hurst: hurst(0.7) };
    let sym = HLadder::new(vec![0.2, 0.1, 0.05], Direction::Symmetric).unwrap();
    let r = estimate_derivative(&fbm, SigmaFieldPlan::Present, 1.0, &sym, &params(20_000, 2, 1.2), &cfg).unwrap();
    assert!(r.nondegenerate);
}

#[test]
fn past_conditioning_diverges_for_fbm() {
    let process = ProcessConfig::Fbm { hurst: hurst(0.7) };
    let ladder = HLadder::geometric(0.04, 4.0, 4, Direction::Forward).unwrap();
    let r = estimate_derivative(
        &process,
        SigmaFieldPlan::Past(8),
        0.5,
        &ladder,
        &params(20_000, 60, 1.0),
        &VerdictConfig::default(),
    )
    .unwrap();
    println!("variances {:?} growth {:?}", r.variance_ladder, r.growth);
    assert_eq!(r.verdict, Verdict::Divergent);
}

#[test]
fn past_conditioning_diverges_for_elliptic_sde() {
    let process = ProcessConfig::Sde {
        hurst: hurst(0.7),
        coefficients: CoefficientSet::sine(0.3),
        steps: 1600,
        scheme: Scheme::MilsteinYoung,
    };
    let ladder = HLadder::geometric(0.04, 4.0, 4, Direction::Forward).unwrap();
    let mut divergent = 0;
    for i in 0..10 {
        let t = 0.3 + 0.05 * i as f64;
        let r = estimate_derivative(
            &process,
            SigmaFieldPlan::Past(8),
            t,
            &ladder,
            &params(4_000, 70 + i, 1.0),
            &VerdictConfig::default(),
        )
        .unwrap();
        println!("t={t} growth {:?} {:?}", r.growth, r.verdict);
        divergent += (r.verdict == Verdict::Divergent) as usize;
    }
    assert!(divergent >= 9, "{divergent} of 10 divergent");
}

#[test]
fn weak_pairing_against_terminal_value() {
    let h = 0.7;
    let process = ProcessConfig::Fbm { hurst: hurst(h) };
    let v = CylindricalFunctional::linear(0.0, vec![1.0], vec![1.0]).unwrap();
    let target = h * (0.5f64.powf(0.4) * 2.0);
    for dir in [Direction::Symmetric, Direction::Forward] {
        let ladder = HLadder::new(vec![0.3, 0.2, 0.1], dir).unwrap();
        let r = weak_pairing_limit(&process, &v, 0.5, &ladder, &params(100_000, 80, 1.0), &PairingConfig::for_direction(dir)).unwrap();
        let exact = r.exact.as_ref().unwrap().limit;
        println!(
            "{dir:?} levels {:?} limit {}±{} exact {exact} closed {:?}",
            r.level_means, r.limit, r.limit_se, r.closed_form
        );
        assert!((exact - target).abs() <= 1e-6, "exact {exact}");
        assert!((r.closed_form.unwrap() - target).abs() <= 1e-9);
        assert!(((r.limit - target) / target).abs() <= 0.02, "mc {}", r.limit);
    }
    let one = CylindricalFunctional::constant(1.0);
    let ladder = HLadder::new(vec![0.3, 0.2, 0.1], Direction::Symmetric).unwrap();
    let r = weak_pairing_limit(&process, &one, 0.5, &ladder, &params(20_000, 81, 1.0), &PairingConfig::for_direction(Direction::Symmetric)).unwrap();
    assert_eq!(r.exact.unwrap().limit, 0.0);
    assert!(r.limit.abs() <= 3.0 * r.limit_se);
}

#[test]
fn weak_pairing_with_drift_gives_mean_drift() {
    let c = CoefficientSet::new(
        "bounded-drift",
        std::sync::Arc::new(|_| 1.0),
        std::sync::Arc::new(|x: f64| x.cos()),
        std::sync::Arc::new(|_| 0.0),
        std::sync::Arc::new(|x: f64| -x.sin()),
        std::sync::Arc::new(|_| 0.0),
        0.0,
        None,
    );
    let process = ProcessConfig::Sde {
        hurst: hurst(0.7),
        coefficients: c,
        steps: 400,
        scheme: Scheme::MilsteinYoung,
    };
    let ladder = HLadder::new(vec![0.3, 0.2, 0.1], Direction::Symmetric).unwrap();
    let one = CylindricalFunctional::constant(1.0);
    let r = weak_pairing_limit(&process, &one, 0.5, &ladder, &params(20_000, 82, 1.0), &PairingConfig::for_direction(Direction::Symmetric)).unwrap();
    let cf = r.closed_form.unwrap();
    println!("limit {}±{} closed {cf}", r.limit, r.limit_se);
    assert!((r.limit - cf).abs() <= 3.0 * r.limit_se + 1e-2);
}

#[test]
fn ou_forward_and_backward_drifts() {
    let theta = 1.0;
    let x0 = 1.0;
    let t = 0.5;
    let process = ProcessConfig::Wiener {
        coefficients: CoefficientSet::ou(theta, x0),
        steps: 1000,
    };
    let density = DensityModel::ou(theta, x0).unwrap();
    let c = CoefficientSet::ou(theta, x0);
    let cfg = VerdictConfig::default();
    let fwd = estimate_derivative(
        &process,
        SigmaFieldPlan::Present,
        t,
        &HLadder::new(vec![0.1, 0.05, 0.02], Direction::Forward).unwrap(),
        &params(100_000, 90, 1.0),
        &VerdictConfig { exponents: Some(vec![0.0, 1.0]), ..cfg.clone() },
    )
    .unwrap();
    let l2f = report_relative_l2(&fwd, |x| wiener_drifts(&c, &density, t, x).unwrap().forward).unwrap();
    let bwd = estimate_derivative(
        &process,
        SigmaFieldPlan::Present,
        t,
        &HLadder::new(vec![0.4, 0.2, 0.1], Direction::Backward).unwrap(),
        &params(100_000, 91, 1.0),
        &VerdictConfig { exponents: Some(vec![0.0, 1.0]), ..cfg.clone() },
    )
    .unwrap();
    let l2b = report_relative_l2(&bwd, |x| wiener_drifts(&c, &density, t, x).unwrap().backward).unwrap();
    println!("forward l2 {l2f} backward l2 {l2b}");
    assert!(l2f <= 0.05 && l2b <= 0.05);

    let bm = ProcessConfig::Wiener {
        coefficients: CoefficientSet::constant(0.0),
        steps: 1000,
    };
    let r = estimate_derivative(
        &bm,
        SigmaFieldPlan::Present,
        t,
        &HLadder::new(vec![0.4, 0.2, 0.1], Direction::Backward).unwrap(),
        &params(100_000, 92, 1.0),
        &VerdictConfig { exponents: Some(vec![0.0, 1.0]), ..cfg },
    )
    .unwrap();
    let l2 = report_relative_l2(&r, |x| x / t).unwrap();
    println!("bm backward l2 {l2}");
    assert!(l2 <= 0.05);
}

#[test]
fn proportional_sde_present_derivative() {
    let (h, r, t) = (0.7, 0.5, 1.0);
    let c = CoefficientSet::proportional(r, 0.0);
    let process = ProcessConfig::Sde {
        hurst: hurst(h),
        coefficients: c.clone(),
        steps: 0,
        scheme: Scheme::ProportionalFlow,
    };
    let ladder = HLadder::new(vec![0.2, 0.1, 0.05], Direction::Symmetric).unwrap();
    let rep = estimate_derivative(
        &process,
        SigmaFieldPlan::Present,
        t,
        &ladder,
        &params(100_000, 100, 1.2),
        &VerdictConfig::default(),
    )
    .unwrap();
    let truth = |x: f64| {
        let b = proportional_driver(&c, t, x).unwrap();
        proportional_present_derivative(&c, hurst(h), t, x, b).unwrap()
    };
    let l2 = report_relative_l2(&rep, truth).unwrap();
    println!("proportional l2 {l2} verdict {:?}", rep.verdict);
    assert!(l2 <= 0.05);
    assert!(rep.nondegenerate);

    let z = ProcessConfig::Sde {
        hurst: hurst(h),
        coefficients: CoefficientSet::vanishing(r, 0.0),
        steps: 0,
        scheme: Scheme::ProportionalFlow,
    };
    let e = z.sample(&[0.5, 1.0], &params(1000, 101, 1.2)).unwrap();
    assert!(e.values().iter().all(|v| *v == 0.0));
    let rep = estimate_derivative(&z, SigmaFieldPlan::Present, t, &ladder, &params(5_000, 101, 1.2), &VerdictConfig::default()).unwrap();
    assert!(!rep.nondegenerate);
    assert_eq!(rep.verdict, Verdict::Convergent);
}

#[test]
fn discriminating_probe_on_the_proportional_family() {
    let h = hurst(0.7);
    let lattice: Vec<f64> = (1..=10).map(|i| 0.1 * i as f64).collect();
    for (c, constant) in [
        (CoefficientSet::vanishing(0.5, 0.0), true),
        (CoefficientSet::proportional(0.5, 0.0), false),
        (CoefficientSet::vanishing(0.5, 1.0), false),
    ] {
        let process = ProcessConfig::Sde {
            hurst: h,
            coefficients: c.clone(),
            steps: 0,
            scheme: Scheme::ProportionalFlow,
        };
        let e = process.sample(&lattice, &params(200, 110, 1.0)).unwrap();
        let paths_constant = (0..e.n_paths()).all(|j| e.path(j).iter().all(|v| *v == c.x0));
        let driver = e.driver().unwrap();
        let width = e.grid().points().len() - 1;
        let mut zero = true;
        for j in 0..e.n_paths() {
            let mut b = 0.0;
            for (k, &s) in lattice.iter().enumerate() {
                b += driver[j * width + k];
                let x = e.value(j, k + 1);
                zero &= proportional_present_derivative(&c, h, s, x, b).unwrap() == 0.0;
            }
        }
        assert_eq!(paths_constant, constant, "{}", c.name);
        assert_eq!(zero, paths_constant, "{}", c.name);
    }
}

#[test]
fn reduced_formula_matches_proportional_closed_form() {
    let (h, r, t) = (0.7, 0.5, 1.0);
    let c = CoefficientSet::proportional(r, 0.0);
    let process = ProcessConfig::Sde {
        hurst: hurst(h),
        coefficients: c.clone(),
        steps: 0,
        scheme: Scheme::ProportionalFlow,
    };
    let grid: Vec<f64> = (1..=128).map(|i| i as f64 / 128.0).collect();
    let e = process.sample(&grid, &params(20_000, 120, 1.0)).unwrap();
    let out = eq23_present_derivative(&c, hurst(h), &e, t, BinRule::default(), 4, 1e-10).unwrap();
    let Eq23Outcome::Evaluated { beta_sup, bins } = out else {
        panic!("expected an evaluated outcome, got {out:?}");
    };
    assert!(beta_sup <= 1e-10);
    let (mut num, mut den) = (0.0, 0.0);
    for b in bins.iter().filter(|b| !b.excluded) {
        let bt = proportional_driver(&c, t, b.x).unwrap();
        let truth = proportional_present_derivative(&c, hurst(h), t, b.x, bt).unwrap();
        num += b.count as f64 * (b.value - truth).powi(2);
        den += b.count as f64 * truth * truth;
    }
    let l2 = (num / den).sqrt();
    println!("reduced formula l2 {l2}");
    assert!(l2 <= 1e-2);

    let s = CoefficientSet::sine(0.0);
    let sde = ProcessConfig::Sde {
        hurst: hurst(h),
        coefficients: s.clone(),
        steps: 128,
        scheme: Scheme::MilsteinYoung,
    };
    let e = sde.sample(&grid, &params(2_000, 121, 1.0)).unwrap();
    let out = eq23_present_derivative(&s, hurst(h), &e, t, BinRule::default(), 4, 1e-10).unwrap();
    assert!(matches!(out, Eq23Outcome::Unevaluated { .. }));
}

#[test]
fn analytic_fbm_cases() {
    assert_eq!(analytic_fbm_present(hurst(0.5), 1.0, 0.7, Direction::Forward).unwrap().value(), Some(0.0));
    let v = analytic_fbm_present(hurst(0.7), 2.0, 1.0, Direction::Forward).unwrap().value().unwrap();
    assert!((v - 0.35).abs() < 1e-15);
    assert_eq!(analytic_fbm_present(hurst(0.3), 1.0, 0.7, Direction::Backward).unwrap(), Analytic::DoesNotExist);
}


