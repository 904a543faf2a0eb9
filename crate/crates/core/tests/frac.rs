use fracnelson::frac::*;
use fracnelson::special::gamma;
use fracnelson::{FracOrder, GridFunction, HurstIndex};
use proptest::prelude::*;

const N: usize = 2048;

fn ord(a: f64) -> FracOrder<f64> {
    FracOrder::new(a).unwrap()
}

fn hu(h: f64) -> HurstIndex<f64> {
    HurstIndex::new(h).unwrap()
}

fn semigroup_gap(f: &GridFunction<f64>, a: f64, b: f64) -> f64 {
    let two = rl_integral(&rl_integral(f, ord(b), Side::Left).unwrap(), ord(a), Side::Left).unwrap();
    let one = rl_integral(f, ord(a + b), Side::Left).unwrap();
    two.max_abs_diff(&one)
}

#[test]
fn monomial_oracle_against_gamma_ratio() {
    for (mu, a) in [(1.0, 0.3), (2.0, 0.5), (2.5, 0.75), (0.0, 0.1)] {
        let m = GridFunction::uniform(0.0, 1.0, N, |x: f64| x.powf(mu)).unwrap();
        let r = rl_integral(&m, ord(a), Side::Left).unwrap();
        let c = gamma(mu + 1.0) / gamma(mu + a + 1.0);
        let exact = m.map(|x, _| c * x.powf(mu + a)).unwrap();
        assert!(r.max_abs_diff(&exact) < 1e-4, "mu={mu} a={a}: {}", r.max_abs_diff(&exact));
    }
}

// With f(0) != 0 the inner integral behaves like x^b at the origin, so the
// composed error lives on the first cell and shrinks like mesh^(a+b).
#[test]
fn semigroup_endpoint_error_has_order_a_plus_b() {
    let f = |x: f64| (3.0 * x).cos() + x * x;
    for (a, b) in [(0.4, 0.2), (0.25, 0.5), (0.5, 0.5)] {
        let coarse = semigroup_gap(&GridFunction::uniform(0.0, 1.0, 512, f).unwrap(), a, b);
        let fine = semigroup_gap(&GridFunction::uniform(0.0, 1.0, N, f).unwrap(), a, b);
        let order = (coarse / fine).ln() / 4f64.ln();
        assert!((order - (a + b)).abs() < 0.15, "a={a} b={b}: observed order {order}");
    }
}

#[test]
fn works_in_single_precision() {
    let m = GridFunction::uniform(0.0f32, 1.0, 256, |x| x * x).unwrap();
    let r = rl_integral(&m, FracOrder::new(0.5f32).unwrap(), Side::Left).unwrap();
    let c = gamma(3.0f32) / gamma(3.5f32);
    let exact = m.map(|x, _| c * x.powf(2.5)).unwrap();
    assert!(r.max_abs_diff(&exact) < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn semigroup_on_functions_vanishing_at_the_origin(
        a in 0.1f64..0.9,
        frac in 0.1f64..1.0,
        c in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let b = (1.0 - a) * frac;
        let f = GridFunction::uniform(0.0, 1.0, N, |x: f64| c[0] * x + c[1] * x * x + c[2] * (3.0 * x).sin()).unwrap();
        let gap = semigroup_gap(&f, a, b);
        prop_assert!(gap <= 1e-3, "a={} b={} gap={}", a, b, gap);
    }

    #[test]
    fn derivative_inverts_integral(a in 0.1f64..0.9, c in prop::array::uniform3(-1.0f64..1.0)) {
        let f = GridFunction::uniform(0.0, 1.0, N, |x: f64| c[0] + c[1] * x * x + c[2] * (2.0 * x).sin()).unwrap();
        let back = rl_derivative(&rl_integral(&f, ord(a), Side::Left).unwrap(), ord(a), Side::Left).unwrap();
        let gap = back.points().iter().zip(back.samples()).map(|(x, v)| (v - f.eval(*x)).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-3, "a={} gap={}", a, gap);
    }

    #[test]
    fn monomial_law(mu in 1.0f64..3.0, a in 0.05f64..1.0) {
        let m = GridFunction::uniform(0.0, 1.0, N, |x: f64| x.powf(mu)).unwrap();
        let r = rl_integral(&m, ord(a), Side::Left).unwrap();
        let c = gamma(mu + 1.0) / gamma(mu + a + 1.0);
        prop_assert!(r.max_abs_diff(&m.map(|x, _| c * x.powf(mu + a)).unwrap()) <= 1e-3);
    }

    #[test]
    fn right_integral_is_the_mirror_of_the_left(a in 0.1f64..1.0, c in -2.0f64..2.0) {
        let f = GridFunction::uniform(0.0, 1.0, 256, |x: f64| (c * x).exp()).unwrap();
        let g = GridFunction::uniform(0.0, 1.0, 256, |x: f64| (c * (1.0 - x)).exp()).unwrap();
        let r = rl_integral(&f, ord(a), Side::Right).unwrap();
        let l = rl_integral(&g, ord(a), Side::Left).unwrap();
        for (k, v) in r.samples().iter().enumerate() {
            prop_assert!((v - l.samples()[256 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn kh_inverse_round_trip(h in 0.55f64..0.95, k in 1.0f64..3.0, c in -1.0f64..1.0) {
        let f = GridFunction::uniform(0.0, 1.0, N, |x: f64| (k * std::f64::consts::PI * x).sin() + c * x * x).unwrap();
        let back = op_kh_inverse(&op_kh(&f, hu(h)).unwrap(), hu(h)).unwrap();
        prop_assert!(back.max_abs_diff(&f) <= 1e-3);
    }

    #[test]
    fn oh_antiderivative_is_kh(h in 0.55f64..0.95, c in -2.0f64..2.0) {
        let phi = GridFunction::uniform(0.0, 1.0, N, |x: f64| 1.0 + c * x * (3.0 * x).sin()).unwrap();
        let k = op_kh(&phi, hu(h)).unwrap();
        let o = op_oh(&phi, hu(h)).unwrap().cumulative_integral().unwrap();
        prop_assert!(k.max_abs_diff(&o) <= 1e-3);
    }
}
