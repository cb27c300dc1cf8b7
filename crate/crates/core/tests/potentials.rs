//! p-potential oracles, profiles, classification and invariants.

use lpkato::geometry::{DensityFn, Domain, MeasureSpec};
use lpkato::kernels::{ProcessSpec, RadialKernel};
use lpkato::potentials::*;
use lpkato::{Limit, Verdict};
use proptest::prelude::*;
use std::f64::consts::PI;

fn newton() -> RadialKernel {
    RadialKernel::reference(3, 2.0)
}

fn unit_ball_lebesgue(d: usize) -> MeasureSpec {
    MeasureSpec::lebesgue(Domain::unit_ball(d))
}

/// `∫_{B_ρ(x)} |x-y|^{-p} dy` in d = 3, away from the support boundary.
fn polar_ball(p: f64, rho: f64) -> f64 {
    4.0 * PI * rho.powf(3.0 - p) / (3.0 - p)
}

#[test]
fn ball_polar_oracle_at_the_centre() {
    let mu = unit_ball_lebesgue(3);
    for p in [1.0, 1.5, 2.0, 2.75] {
        let v = p_potential(&newton(), p, &mu, &[0.0; 3], &Region::all()).unwrap();
        assert!((v.value / polar_ball(p, 1.0) - 1.0).abs() < 1e-8, "p={p}: {}", v.value);
    }
    let v = p_potential(&newton(), 3.0, &mu, &[0.0; 3], &Region::all()).unwrap();
    assert!(v.value.is_infinite());
}

#[test]
fn sup_over_the_ball_sits_at_the_centre() {
    let mu = unit_ball_lebesgue(3);
    let s = sup_p_potential(&newton(), 1.0, &mu, &Region::all(), &SupSearch::default()).unwrap();
    assert!((s.value - 2.0 * PI).abs() < 1e-6 * 2.0 * PI, "{}", s.value);
    let off = s.argmax.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(off < 1e-2, "argmax {:?}", s.argmax);
}

#[test]
fn sphere_sup_equals_the_symmetric_value() {
    // ∫_{S²} |x-y|^{-1} σ(dy) = 4π for |x| ≤ 1
    let mu = MeasureSpec::sphere(vec![0.0; 3], 1.0).unwrap();
    let on = p_potential(&newton(), 1.0, &mu, &[0.6, 0.0, 0.8], &Region::all()).unwrap();
    let inside = p_potential(&newton(), 1.0, &mu, &[0.2, -0.1, 0.3], &Region::all()).unwrap();
    let s = sup_p_potential(&newton(), 1.0, &mu, &Region::all(), &SupSearch::default()).unwrap();
    for v in [on.value, inside.value, s.value] {
        assert!((v - 4.0 * PI).abs() < 1e-6, "{v}");
    }
}

#[test]
fn atoms_contribute_point_values() {
    let mu = MeasureSpec::atoms(3, vec![(vec![2.0, 0.0, 0.0], 1.5), (vec![0.0, -1.0, 0.0], 0.5)]).unwrap();
    let v = p_potential(&newton(), 2.0, &mu, &[0.0; 3], &Region::all()).unwrap();
    assert!((v.value - (1.5 / 4.0 + 0.5)).abs() < 1e-14);
    let far = p_potential(&newton(), 2.0, &mu, &[0.0; 3], &Region::near(1.5)).unwrap();
    assert!((far.value - 0.5).abs() < 1e-14);
}

#[test]
fn local_profile_is_two_pi_r_squared() {
    let mu = unit_ball_lebesgue(3);
    let prof = local_kato_profile(&newton(), 1.0, &mu, &default_radii(), &SupSearch::default()).unwrap();
    for (r, v) in prof.abscissae.iter().zip(&prof.values) {
        assert!((v / (2.0 * PI * r * r) - 1.0).abs() < 1e-6, "r={r}: {v}");
    }
    assert_eq!(prof.verdict, Verdict::In);
    let fit = prof.fitted_exponent.unwrap();
    assert!((fit.exponent - 2.0).abs() < 1e-3, "{}", fit.exponent);
}

#[test]
fn local_profile_of_the_zero_measure_is_in() {
    let zero = MeasureSpec::atoms(3, vec![]).unwrap();
    let prof = local_kato_profile(&newton(), 2.0, &zero, &default_radii(), &SupSearch::default()).unwrap();
    assert!(prof.values.iter().all(|v| *v == 0.0));
    assert_eq!(prof.verdict, Verdict::In);
}

#[test]
fn tail_profiles() {
    let search = SupSearch::default();
    let radii = default_tail_radii();

    let compact = unit_ball_lebesgue(3);
    let t = tail_profile(&newton(), 1.0, &compact, &[0.0; 3], &radii, &search).unwrap();
    assert_eq!(t.limit, Limit::Infinity);
    assert!(t.values[1..].iter().all(|v| *v == 0.0));
    assert_eq!(t.verdict, Verdict::In);

    let whole = MeasureSpec::lebesgue(Domain::full(3));
    let t = tail_profile(&newton(), 1.0, &whole, &[0.0; 3], &radii, &search).unwrap();
    assert_eq!(t.verdict, Verdict::Out);

    let dens = DensityFn::Exponential { center: vec![0.0; 3], rate: 1.0, amplitude: 1.0 };
    let mu = MeasureSpec::density(Domain::full(3), dens).unwrap();
    let t = tail_profile(&newton(), 1.0, &mu, &[0.0; 3], &[1.0, 2.0, 4.0, 8.0, 16.0], &search).unwrap();
    assert!(t.values.windows(2).all(|w| w[1] < w[0]), "{:?}", t.values);
    assert!(t.values[4] < 1e-3 * t.values[0]);
    assert_eq!(t.verdict, Verdict::In);
}

#[test]
fn chen_with_zero_delta_is_the_tail_check() {
    let mu = MeasureSpec::lebesgue(Domain::ball(vec![0.0; 3], 2.0).unwrap());
    let k = Ball { center: vec![0.0; 3], radius: 1.0 };
    let search = SupSearch::default();
    let tail = sup_p_potential(&newton(), 1.0, &mu, &Region::tail(vec![0.0; 3], 1.0), &search).unwrap();
    let c = chen_condition_check(&newton(), 1.0, &mu, 2.0 * tail.value, &k, 0.0, &search).unwrap();
    assert_eq!(c.outcome, ChenOutcome::Holds);
    assert!((c.tail_value / tail.value - 1.0).abs() < 1e-6, "{} vs {}", c.tail_value, tail.value);
    let c = chen_condition_check(&newton(), 1.0, &mu, 0.5 * tail.value, &k, 0.0, &search).unwrap();
    assert_eq!(c.outcome, ChenOutcome::Violated);
}

#[test]
fn chen_captures_an_atom() {
    let mu = MeasureSpec::atoms(1, vec![(vec![0.0], 1.0)]).unwrap();
    let k = Ball { center: vec![0.0], radius: 1.0 };
    let c = chen_condition_check(&RadialKernel::reference(1, 0.5), 1.0, &mu, 1e6, &k, 2.0, &SupSearch::default()).unwrap();
    assert_eq!(c.outcome, ChenOutcome::Violated);
    assert!(c.worst.unwrap().value.is_infinite());
}

#[test]
fn chen_ball_oracle() {
    let mu = unit_ball_lebesgue(3);
    let k = Ball { center: vec![0.0; 3], radius: 1.0 };
    let delta = 1e-3;
    let r_delta = (3.0 * delta / (4.0 * PI)).cbrt();
    let bound = 2.0 * PI * r_delta * r_delta;
    let search = SupSearch::default();
    let c = chen_condition_check(&newton(), 1.0, &mu, 2.0 * bound, &k, delta, &search).unwrap();
    assert_eq!(c.outcome, ChenOutcome::Holds);
    let worst = c.worst.unwrap().value;
    assert!((worst / bound - 1.0).abs() < 0.02, "{worst} vs {bound}");
    let c = chen_condition_check(&newton(), 1.0, &mu, 0.5 * bound, &k, delta, &search).unwrap();
    assert_eq!(c.outcome, ChenOutcome::Violated);
}

#[test]
fn classify_examples() {
    let opts = ClassifyOptions::default();
    let b3 = ProcessSpec::brownian(3);

    let r = classify(&b3, 1.0, &unit_ball_lebesgue(3), &opts).unwrap();
    assert_eq!(r.verdicts.s_k, Verdict::In);
    assert_eq!(r.verdicts.zhao, Verdict::In);
    assert_eq!(r.verdicts.chen, Verdict::In);
    assert_eq!(r.analytic_threshold, Some(3.0));
    assert!(r.verdicts.audit().is_empty());

    let r = classify(&b3, 3.0, &MeasureSpec::lebesgue(Domain::full(3)), &opts).unwrap();
    assert_eq!(r.verdicts.s_k, Verdict::Out);

    let s = ProcessSpec::stable(1, 1.5).unwrap();
    let mu = MeasureSpec::lebesgue(Domain::interval(-2.0, 2.0).unwrap());
    for p in [1.0, 4.0, 16.0] {
        let r = classify(&s, p, &mu, &opts).unwrap();
        assert_eq!(r.verdicts.s_k, Verdict::In, "p={p}");
        assert_eq!(r.verdicts.k_local, Verdict::In);
    }
}

#[test]
fn analytic_thresholds() {
    let b3 = ProcessSpec::brownian(3);
    assert_eq!(analytic_threshold(&b3, MeasureFamily::Lebesgue), 3.0);
    assert_eq!(analytic_threshold(&b3, MeasureFamily::SphereSurface), 2.0);
    assert!(analytic_threshold(&ProcessSpec::stable(1, 1.5).unwrap(), MeasureFamily::Lebesgue).is_infinite());
    assert_eq!(analytic_threshold(&ProcessSpec::stable(2, 1.0).unwrap(), MeasureFamily::Lebesgue), 2.0);
    assert_eq!(measure_family(&unit_ball_lebesgue(2)), Some(MeasureFamily::Lebesgue));
    assert_eq!(measure_family(&MeasureSpec::atoms(2, vec![]).unwrap()), None);
}

#[test]
fn tail_bound_gamma_oracle() {
    let e = |u: f64| (-u).exp();
    for r in [0.25, 1.0, 3.0] {
        let m = tail_bound_m(r, 3.0, 2.0, &e).unwrap();
        assert!((m - 2.0 / r).abs() < 1e-8 * (2.0 / r));
    }
    // ν - β = 2.5: Γ(2.5)
    let m = tail_bound_m(1.0, 4.5, 2.0, &e).unwrap();
    assert!((m - 2.0 * 1.329_340_388_179_137).abs() < 1e-8);
    assert!(tail_bound_m(1.0, 2.0, 2.0, &e).is_err());
    assert!(tail_bound_m(1.0, 3.0, 2.0, &|_| 1.0).is_err());
}

/// S_K verdict on a p grid of step 0.25 away from the threshold.
fn threshold_sweep(spec: &ProcessSpec, mu: &MeasureSpec, p_star: f64, p_max: f64) {
    let opts = ClassifyOptions::default();
    let mut p = 1.0;
    while p <= p_max {
        if (p - p_star).abs() >= 0.25 - 1e-12 {
            let want = if p < p_star { Verdict::In } else { Verdict::Out };
            let r = classify(spec, p, mu, &opts).unwrap();
            assert_eq!(r.verdicts.s_k, want, "{} p={p}", spec.label());
            assert!(r.verdicts.audit().is_empty(), "{:?}", r.verdicts.audit());
        }
        p += 0.25;
    }
}

#[test]
fn threshold_consistency_brownian_lebesgue() {
    threshold_sweep(&ProcessSpec::brownian(3), &unit_ball_lebesgue(3), 3.0, 4.0);
}

#[test]
fn threshold_consistency_brownian_sphere() {
    let mu = MeasureSpec::sphere(vec![0.0; 3], 1.0).unwrap();
    threshold_sweep(&ProcessSpec::brownian(3), &mu, 2.0, 3.0);
}

#[test]
fn threshold_consistency_stable_plane() {
    threshold_sweep(&ProcessSpec::stable(2, 1.0).unwrap(), &unit_ball_lebesgue(2), 2.0, 3.0);
}

#[test]
fn frostman_reduction_agrees() {
    let sphere = MeasureSpec::sphere(vec![0.0; 3], 1.0).unwrap();
    let ball = unit_ball_lebesgue(3);
    let on = SupSearch::default();
    let off = SupSearch { frostman: false, ..SupSearch::default() };
    for (mu, p) in [(&sphere, 1.5), (&ball, 2.0)] {
        let a = sup_p_potential(&newton(), p, mu, &Region::all(), &on).unwrap().value;
        let b = sup_p_potential(&newton(), p, mu, &Region::all(), &off).unwrap().value;
        assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monotone_in_p_where_kernel_at_most_one(
        x in prop::collection::vec(-1.5f64..1.5, 3),
        p in 1.0f64..4.0,
        dp in 0.1f64..2.0,
    ) {
        // |x-y|^{-1} ≤ 1 exactly on |y - x| ≥ 1
        let mu = MeasureSpec::lebesgue(Domain::ball(vec![0.0; 3], 2.0).unwrap());
        let region = Region::tail(x.clone(), 1.0);
        let lo = p_potential(&newton(), p, &mu, &x, &region).unwrap().value;
        let hi = p_potential(&newton(), p + dp, &mu, &x, &region).unwrap().value;
        prop_assert!(hi <= lo * (1.0 + 1e-8), "{hi} > {lo}");
    }

    #[test]
    fn implication_audit_on_random_runs(p in 1.0f64..4.0, alpha in 0.5f64..1.9, d in 1usize..4) {
        let spec = ProcessSpec::stable(d, alpha).unwrap();
        let r = classify(&spec, p, &unit_ball_lebesgue(d), &ClassifyOptions::default()).unwrap();
        prop_assert!(r.verdicts.audit().is_empty(), "{:?}", r.verdicts.audit());
    }
}
