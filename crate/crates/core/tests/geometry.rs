//! Domain and measure invariants.

use lpkato::geometry::*;
use lpkato::Verdict;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn exp_horn() -> Domain {
    Domain::horn(2, HornProfile::Exp { scale: 1.0, rate: 1.0 }, 0.0).unwrap()
}

fn catalogue() -> Vec<MeasureSpec> {
    vec![
        MeasureSpec::lebesgue(Domain::unit_ball(2)),
        MeasureSpec::lebesgue(Domain::cube(vec![-1.0, 0.0], vec![1.0, 0.5]).unwrap()),
        MeasureSpec::lebesgue(exp_horn()),
        MeasureSpec::sphere(vec![0.0, 0.0], 1.0).unwrap(),
        MeasureSpec::density(
            Domain::full(2),
            DensityFn::Gaussian { center: vec![0.5, 0.0], width: 0.7, amplitude: 2.0 },
        )
        .unwrap(),
        MeasureSpec::atoms(2, vec![(vec![0.2, 0.2], 1.0), (vec![-1.0, 0.5], 0.25)]).unwrap(),
    ]
}

#[test]
fn bounded_domains_are_b0_and_full_space_is_not() {
    let radii = [10.0, 20.0, 40.0];
    for d in [
        Domain::unit_ball(3),
        Domain::cube(vec![0.0; 2], vec![5.0, 1.0]).unwrap(),
        Domain::intersection(vec![exp_horn(), Domain::unit_ball(2)]).unwrap(),
    ] {
        assert_eq!(b0_profile(&d, &radii).unwrap().verdict, Verdict::In);
    }
    for d in 1..=3 {
        assert_eq!(b0_profile(&Domain::full(d), &radii).unwrap().verdict, Verdict::Out);
    }
}

#[test]
fn polynomial_horn_is_b0() {
    let horn = Domain::horn(2, HornProfile::Power { scale: 1.0, exponent: 1.0 }, 1.0).unwrap();
    // width 2/x decays slowly: short ladders stay undecided
    let p = b0_profile(&horn, &[10.0, 20.0, 40.0, 80.0]).unwrap();
    assert_eq!(p.verdict, Verdict::Inconclusive);
    let p = b0_profile(&horn, &[10.0, 100.0, 1e3, 1e4, 1e5]).unwrap();
    assert_eq!(p.verdict, Verdict::In);
}

#[test]
fn sample_integrate_consistency() {
    let f = |y: &[f64]| 1.0 + y[0] * y[0] - 0.5 * y[1];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for mu in catalogue() {
        let env = Domain::cube(vec![-3.0; 2], vec![30.0, 3.0]).unwrap();
        let exact = mu.integrate(Some(&f), Some(&env), &[]).unwrap().value;
        let mass = mu.integrate(None, Some(&env), &[]).unwrap().value;
        let n = 200_000;
        let s = mu.sample(n, &mut rng, Some(&env)).unwrap();
        let vals: Vec<f64> = s.iter().map(|(y, w)| w * f(y)).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - exact / mass).abs() <= 4.0 * se + 1e-12, "{mu:?}: {mean} ± {se} vs {}", exact / mass);
    }
}

#[test]
fn config_round_trip_is_bit_exact() {
    for mu in catalogue() {
        let text = toml::to_string(&mu).unwrap();
        let back: MeasureSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, mu);
        assert_eq!(toml::to_string(&back).unwrap(), text);
    }
    let d = Domain::union(vec![Domain::unit_ball(2), Domain::strip(2, 0, 0.1 + 0.2).unwrap()]).unwrap();
    let back: Domain = toml::from_str(&toml::to_string(&d).unwrap()).unwrap();
    assert_eq!(back, d);
}

#[test]
fn sphere_area_matches_surface_formula() {
    assert!(MeasureSpec::sphere(vec![0.0; 4], 1.0).is_err());
    for (d, r) in [(2usize, 0.5), (3, 1.5)] {
        let s = MeasureSpec::sphere(vec![0.0; d], r).unwrap();
        let omega = 2.0 * PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0);
        let want = omega * r.powi(d as i32 - 1);
        assert!((s.total_mass() / want - 1.0).abs() < 1e-8, "d={d}");
    }
}

#[test]
fn invalid_measures_are_rejected() {
    assert!(MeasureSpec::atoms(1, vec![(vec![0.0], -1.0)]).is_err());
    assert!(MeasureSpec::mixture(1, vec![(-0.5, MeasureSpec::lebesgue(Domain::full(1)))]).is_err());
    assert!(MeasureSpec::sphere(vec![0.0; 2], -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ball_mass_nondecreasing_in_r(
        which in 0usize..6,
        x in prop::collection::vec(-2.0f64..2.0, 2),
        r in 0.05f64..2.0,
        dr in 0.01f64..1.0,
    ) {
        let mu = &catalogue()[which];
        let a = mu.ball_mass(&x, r).unwrap();
        let b = mu.ball_mass(&x, r + dr).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!(b >= a * (1.0 - 1e-6) - 1e-10, "{a} > {b}");
    }

    #[test]
    fn bounded_domains_exclude_points_beyond_the_circumradius(
        x in prop::collection::vec(-10.0f64..10.0, 2),
    ) {
        let doms = [
            Domain::ball(vec![1.0, -1.0], 1.5).unwrap(),
            Domain::cube(vec![0.0; 2], vec![2.0, 1.0]).unwrap(),
            Domain::intersection(vec![exp_horn(), Domain::unit_ball(2)]).unwrap(),
        ];
        for d in &doms {
            let r = d.circumradius().unwrap();
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > r {
                prop_assert!(!d.contains(&x).unwrap());
            }
        }
    }

    #[test]
    fn mixture_integral_is_additive(w1 in 0.0f64..3.0, w2 in 0.0f64..3.0) {
        let cat = catalogue();
        let (a, b) = (&cat[0], &cat[5]);
        let m = MeasureSpec::mixture(2, vec![(w1, a.clone()), (w2, b.clone())]).unwrap();
        let f = |y: &[f64]| (y[0] - y[1]).cos();
        let lhs = m.integrate(Some(&f), None, &[]).unwrap().value;
        let rhs = w1 * a.integrate(Some(&f), None, &[]).unwrap().value
            + w2 * b.integrate(Some(&f), None, &[]).unwrap().value;
        prop_assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()));
    }
}
