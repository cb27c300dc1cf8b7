//! Discrete Dirichlet forms: oracles, spectra and structural invariants.

use lpkato::forms::*;
use lpkato::geometry::Domain;
use lpkato::kernels::jump_kernel_radial;
use lpkato::Verdict;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn unit_interval(h: f64) -> DiscreteForm {
    assemble_local(&Domain::interval(0.0, 1.0).unwrap(), h).unwrap()
}

fn unit_square(h: f64) -> DiscreteForm {
    assemble_local(&Domain::cube(vec![0.0; 2], vec![1.0; 2]).unwrap(), h).unwrap()
}

fn nonlocal_interval() -> DiscreteForm {
    assemble_nonlocal(1.5, 1.0, &Domain::interval(0.0, 1.0).unwrap(), 1.0 / 32.0, 2.0).unwrap()
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

#[test]
fn zero_function_has_zero_energy() {
    for f in [unit_interval(0.05), unit_square(0.1), nonlocal_interval()] {
        assert_eq!(f.energy(&vec![0.0; f.len()]), 0.0);
    }
}

#[test]
fn sine_energy_converges() {
    let f = unit_interval(1.0 / 256.0);
    let u: Vec<f64> = f.nodes.iter().map(|x| (PI * x[0]).sin()).collect();
    assert!((f.energy(&u) / (PI * PI / 4.0) - 1.0).abs() < 0.01);
}

#[test]
fn mass_weights_sum_to_volume() {
    let cases = [
        (unit_interval(0.01), 1.0),
        (unit_square(0.05), 1.0),
        (assemble_local(&Domain::unit_ball(2), 0.02).unwrap(), PI),
        (assemble_local(&Domain::unit_ball(3), 0.05).unwrap(), 4.0 * PI / 3.0),
    ];
    for (f, vol) in cases {
        assert!((f.total_mass() / vol - 1.0).abs() < 0.01, "{} vs {vol}", f.total_mass());
    }
}

#[test]
fn constants_have_energy_only_through_the_boundary() {
    let f = unit_square(0.1);
    assert!(has_dirichlet_boundary(&f));
    assert!(f.energy(&vec![1.0; f.len()]) > 0.0);

    let g = nonlocal_on_nodes(1.0, 0.5, vec![vec![0.0], vec![0.4], vec![1.1]], vec![0.2, 0.3, 0.4]).unwrap();
    assert!(!has_dirichlet_boundary(&g));
    assert!(g.energy(&[1.0; 3]).abs() < 1e-14);
}

#[test]
fn mass_suppresses_long_range_coupling() {
    let nodes = vec![vec![0.0], vec![10.0]];
    let mut last = f64::INFINITY;
    for m in [0.0, 0.1, 0.5, 1.0, 2.0] {
        let f = nonlocal_on_nodes(1.0, m, nodes.clone(), vec![1.0, 1.0]).unwrap();
        let e = f.energy(&[1.0, -1.0]);
        let j = jump_kernel_radial(1.0, m, 1, 10.0).unwrap();
        assert!((e - 4.0 * j).abs() < 1e-12 * e);
        assert!(e < last);
        last = e;
    }
}

#[test]
fn dump_round_trip_nonlocal() {
    let f = nonlocal_interval();
    let g = DiscreteForm::from_text(&f.to_text()).unwrap();
    assert_eq!(f.kind, g.kind);
    assert_eq!(f.boundary, g.boundary);
    let u = random_vec(f.len(), 3);
    assert!((f.energy(&u) / g.energy(&u) - 1.0).abs() < 1e-12);
    assert_eq!(g.to_text(), f.to_text());
}

#[test]
fn dirichlet_eigenvalue_oracles() {
    let r = dirichlet_eigenvalues(&Domain::interval(0.0, 1.0).unwrap(), 1, &[0.02, 0.01, 0.005]).unwrap();
    assert!((r.values()[0] / (PI * PI / 2.0) - 1.0).abs() < 0.005, "{:?}", r.values());

    let r = dirichlet_eigenvalues(&Domain::cube(vec![0.0; 2], vec![1.0; 2]).unwrap(), 1, &[0.05, 0.025, 0.0125]).unwrap();
    assert!((r.values()[0] / (PI * PI) - 1.0).abs() < 0.005, "{:?}", r.values());

    let j01 = 2.404_825_557_695_773f64;
    let r = dirichlet_eigenvalues(&Domain::unit_ball(2), 1, &[0.05, 0.025, 0.0125]).unwrap();
    assert!((r.values()[0] / (0.5 * j01 * j01) - 1.0).abs() < 0.01, "{:?}", r.values());
}

#[test]
fn interval_singular_values() {
    let f = unit_interval(1.0 / 512.0);
    let r = embedding_singular_values(&f, 5).unwrap();
    for (k, s) in r.levels[0].values.iter().enumerate() {
        let exact = 2f64.sqrt() / ((k + 1) as f64 * PI);
        assert!((s / exact - 1.0).abs() < 0.01, "k={}: {s}", k + 1);
    }
}

#[test]
fn stollmann_voigt_sine_margin() {
    let f = unit_interval(1.0 / 256.0);
    let norm = interval_potential_norm(0.0, 1.0, 1.0).unwrap();
    assert!((norm - 0.25).abs() < 1e-10);
    let u: Vec<f64> = f.nodes.iter().map(|x| (PI * x[0]).sin()).collect();
    let rep = stollmann_voigt_check(&f, None, 1.0, norm, &[u]).unwrap();
    let exact = PI * PI / 16.0 - 0.5;
    assert!((rep.min_margin / exact - 1.0).abs() < 0.02, "{}", rep.min_margin);

    let zero = stollmann_voigt_check(&f, None, 1.0, norm, &[vec![0.0; f.len()]]).unwrap();
    assert_eq!(zero.min_margin, 0.0);
}

#[test]
fn stollmann_voigt_random_audit() {
    for f in [unit_interval(1.0 / 64.0), unit_square(1.0 / 16.0)] {
        let tests = random_test_functions(&f, 50, 11).unwrap();
        for p in [1.0, 2.0] {
            let norm = discrete_potential_norm(&f, p, None).unwrap();
            let rep = stollmann_voigt_check(&f, None, p, norm, &tests).unwrap();
            assert_eq!(rep.status, SvStatus::Checked);
            assert!(rep.min_margin >= -1e-8, "p={p}: {}", rep.min_margin);
        }
    }
    let rep = stollmann_voigt_check(&unit_interval(0.1), None, 1.0, f64::INFINITY, &[]).unwrap();
    assert_eq!(rep.status, SvStatus::SkippedInfinitePotential);
}

#[test]
fn tightness_on_a_bounded_interval() {
    let f = unit_interval(1.0 / 64.0);
    let levels = [1.0, 4.0, 16.0, 64.0, 256.0, 1024.0];
    let rep = tightness_diagnostic(&f, 1.0, 1.0, &levels, 128, 5).unwrap();
    assert_eq!(rep.profile.verdict, Verdict::In);
    let zero = tightness_diagnostic(&f, 1.0, 0.0, &levels, 16, 5).unwrap();
    assert!(zero.profile.values.iter().all(|v| *v == 0.0));
}

#[test]
fn embedding_truncation_strip_is_not_compact() {
    let strip = Domain::strip(2, 1, 1.0).unwrap();
    let r = embedding_truncation_study(&strip, &[4.0, 8.0], 0.1, 6).unwrap();
    assert_eq!(r.verdict, Some(Verdict::Out));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_symmetric_and_psd(seed in 0u64..1_000_000) {
        for f in [unit_square(0.1), nonlocal_interval()] {
            let u = random_vec(f.len(), seed);
            let v = random_vec(f.len(), seed ^ 0x5555);
            let scale = f.energy(&u) + f.energy(&v);
            prop_assert!(f.energy(&u) >= -1e-12 * scale);
            prop_assert!((f.bilinear(&u, &v) - f.bilinear(&v, &u)).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn unit_truncation_contracts(seed in 0u64..1_000_000, k in 0.1f64..2.0) {
        for f in [unit_square(0.1), nonlocal_interval()] {
            let u = random_vec(f.len(), seed);
            let t = truncate_values(&u, k);
            prop_assert!(t.iter().all(|x| x.abs() <= k));
            prop_assert!(f.energy(&t) <= f.energy(&u) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn semigroup_energy_bound(seed in 0u64..1_000_000, t in prop::sample::select(vec![0.1, 1.0])) {
        let f = unit_square(0.1);
        let u = random_vec(f.len(), seed);
        let pu = f.semigroup(t, &u).unwrap();
        let bound = f.lq_norm(&u, 2.0).powi(2) / (2.0 * std::f64::consts::E * t);
        prop_assert!(f.energy(&pu) <= 1.05 * bound, "{} > {bound}", f.energy(&pu));
    }
}
