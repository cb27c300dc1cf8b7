//! Kernel oracles and invariants.

use lpkato::kernels::*;
use lpkato::selftest::{chapman_kolmogorov_defect, mass_defect, resolvent_defect};
use proptest::prelude::*;
use std::f64::consts::PI;

/// Composite Simpson on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn relativistic_matches_riemann_oracle() {
    // p_t(r) = (1/π) ∫_0^∞ cos(ξr) exp(-t(√(ξ²+1) - 1)) dξ in d = 1, α = m = 1
    let spec = ProcessSpec::relativistic(1, 1.0, 1.0).unwrap();
    for r in [0.0, 0.5, 2.0] {
        let oracle = simpson(|x| (x * r).cos() * (-((x * x + 1.0).sqrt() - 1.0)).exp(), 0.0, 60.0, 120_000) / PI;
        let v = heat_kernel_radial(&spec, 1.0, r).unwrap().value;
        assert!((v / oracle - 1.0).abs() < 1e-4, "r={r}: {v} vs {oracle}");
    }
}

#[test]
fn newton_green_by_time_integral() {
    // ∫_0^∞ (2πt)^{-3/2} e^{-r²/2t} dt with t = e^u
    let spec = ProcessSpec::brownian(3);
    for r in [0.5f64, 1.0, 2.0] {
        let f = |u: f64| {
            let t = u.exp();
            (2.0 * PI * t).powf(-1.5) * (-r * r / (2.0 * t)).exp() * t
        };
        let oracle = simpson(f, -30.0, 40.0, 70_000);
        let v = green_kernel(&spec, &[0.0; 3], &[r, 0.0, 0.0]).unwrap().value;
        assert!((v / oracle - 1.0).abs() < 1e-6, "{v} vs {oracle}");
        assert!((v - 1.0 / (2.0 * PI * r)).abs() < 1e-12);
    }
}

#[test]
fn one_dimensional_brownian_resolvent() {
    let spec = ProcessSpec::brownian(1);
    for r in [0.0, 0.5, 1.0, 3.0] {
        let exact = (-2f64.sqrt() * r).exp() / 2f64.sqrt();
        let v = resolvent_kernel(&spec, 1.0, &[0.0], &[r]).unwrap().value;
        assert!((v / exact - 1.0).abs() < 1e-6);
    }
}

#[test]
fn recurrent_green_is_rejected() {
    let spec = ProcessSpec::stable(1, 1.0).unwrap();
    assert!(green_kernel(&spec, &[0.0], &[1.0]).is_err());
}

#[test]
fn chapman_kolmogorov_spot_checks() {
    for spec in [
        ProcessSpec::brownian(3),
        ProcessSpec::stable(1, 1.5).unwrap(),
        ProcessSpec::relativistic(1, 1.5, 0.5).unwrap(),
    ] {
        let e = chapman_kolmogorov_defect(&spec, 1.0, 0.5, 1.0).unwrap();
        assert!(e < 1e-3, "{}: {e}", spec.label());
    }
}

#[test]
fn conservative_mass() {
    for spec in [
        ProcessSpec::brownian(2),
        ProcessSpec::stable(1, 1.5).unwrap(),
        ProcessSpec::relativistic(3, 1.0, 1.0).unwrap(),
    ] {
        let e = mass_defect(&spec, 1.0).unwrap();
        assert!(e < 1e-6, "{}: {e}", spec.label());
    }
}

#[test]
fn resolvent_equation() {
    for spec in [ProcessSpec::brownian(3), ProcessSpec::stable(1, 1.5).unwrap()] {
        let e = resolvent_defect(&spec, 1.0, 2.0, 0.7).unwrap();
        assert!(e < 1e-3, "{}: {e}", spec.label());
    }
}

#[test]
fn on_diagonal_examples() {
    let b = ProcessSpec::brownian(1);
    assert!((heat_kernel_radial(&b, 1.0, 0.0).unwrap().value - (2.0 * PI).powf(-0.5)).abs() < 1e-15);
    let c = ProcessSpec::stable(1, 1.0).unwrap();
    assert!((heat_kernel_radial(&c, 1.0, 0.0).unwrap().value - 1.0 / PI).abs() < 1e-15);
    assert!((ultracontractivity_bound(&ProcessSpec::brownian(2), 1.0, None).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-12);
}

#[test]
fn cauchy_schwarz_on_heat_kernels() {
    let spec = ProcessSpec::stable(2, 1.5).unwrap();
    let (x, y) = ([0.1, 0.2], [-0.7, 0.4]);
    let pxy = heat_kernel(&spec, 0.8, &x, &y).unwrap().value;
    let pxx = heat_kernel(&spec, 0.8, &x, &x).unwrap().value;
    let pyy = heat_kernel(&spec, 0.8, &y, &y).unwrap().value;
    assert!(pxy <= (pxx * pyy).sqrt());
}

#[test]
fn psi_normalisation() {
    // I(0) = 4^{(d+α)/2} Γ((d+α)/2); Ψ(0) = 1
    assert_eq!(psi(0.0, 1, 1.0), 1.0);
    assert!(psi(5.0, 1, 1.0) < psi(1.0, 1, 1.0));
    assert!(psi(1.0, 1, 1.0) < psi(0.1, 1, 1.0));
    let a = jump_constant(1, 1.0);
    assert!((a - 1.0 / PI).abs() < 1e-12);
}

#[test]
fn jump_kernel_small_mass_limit() {
    let v = jump_kernel_radial(1.5, 1e-12, 2, 0.7).unwrap();
    let limit = jump_constant(2, 1.5) * 0.7f64.powf(-3.5);
    assert!((v / limit - 1.0).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heat_kernel_symmetric_and_positive(
        t in 0.05f64..5.0,
        x in prop::collection::vec(-2.0f64..2.0, 2),
        y in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        for spec in [ProcessSpec::brownian(2), ProcessSpec::stable(2, 1.2).unwrap()] {
            let a = heat_kernel(&spec, t, &x, &y).unwrap().value;
            let b = heat_kernel(&spec, t, &y, &x).unwrap().value;
            prop_assert_eq!(a, b);
            prop_assert!(a > 0.0);
        }
    }

    #[test]
    fn heat_kernel_radially_decreasing(t in 0.1f64..3.0, r in 0.0f64..5.0, dr in 0.01f64..1.0) {
        let spec = ProcessSpec::stable(3, 0.8).unwrap();
        let a = heat_kernel_radial(&spec, t, r).unwrap().value;
        let b = heat_kernel_radial(&spec, t, r + dr).unwrap().value;
        prop_assert!(b <= a * (1.0 + 1e-9));
    }

    #[test]
    fn psi_in_unit_interval_and_decreasing(r in 0.0f64..20.0, dr in 0.01f64..2.0, d in 1usize..4, alpha in 0.2f64..1.9) {
        let a = psi(r, d, alpha);
        let b = psi(r + dr, d, alpha);
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b < a);
    }

    #[test]
    fn interval_green_symmetric_and_vanishing(x in 0.01f64..0.99, y in 0.01f64..0.99) {
        let g = interval_green(0.0, 1.0, x, y).unwrap();
        prop_assert!((g - interval_green(0.0, 1.0, y, x).unwrap()).abs() < 1e-15);
        prop_assert!(interval_green(0.0, 1.0, 1e-12, y).unwrap() < 1e-11);
    }

    #[test]
    fn resolvent_decreasing_in_order(r in 0.05f64..3.0, a in 0.1f64..3.0, da in 0.1f64..3.0) {
        let spec = ProcessSpec::brownian(3);
        let lo = resolvent_kernel_radial(&spec, a + da, r).unwrap().value;
        let hi = resolvent_kernel_radial(&spec, a, r).unwrap().value;
        prop_assert!(lo < hi);
    }
}
