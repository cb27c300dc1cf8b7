//! Monte Carlo samplers and estimators against distributional and PDE oracles.

use lpkato::geometry::Domain;
use lpkato::kernels::ProcessSpec;
use lpkato::stochastic::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn draws(spec: &ProcessSpec, dt: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_increment(spec, dt, &mut rng).unwrap()).collect()
}

/// Two-sample Kolmogorov–Smirnov distance.
fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[test]
fn brownian_increments_have_identity_covariance() {
    let x = draws(&ProcessSpec::brownian(2), 1.0, 200_000, 1);
    let n = x.len() as f64;
    for a in 0..2 {
        for b in 0..2 {
            let prod: Vec<f64> = x.iter().map(|v| v[a] * v[b]).collect();
            let (m, se) = mean_se(&prod);
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((m - want).abs() < 3.0 * se, "cov[{a}][{b}] = {m} ± {se}");
        }
        let (m, se) = mean_se(&x.iter().map(|v| v[a]).collect::<Vec<_>>());
        assert!(m.abs() < 3.0 * se && se < 2.0 / n.sqrt());
    }
}

#[test]
fn cauchy_marginal() {
    let x = draws(&ProcessSpec::stable(1, 1.0).unwrap(), 1.0, 1_000_000, 2);
    let mut v: Vec<f64> = x.into_iter().map(|v| v[0]).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let ks = v
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = 0.5 + t.atan() / PI;
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.005, "KS {ks}");
}

#[test]
fn relativistic_characteristic_function() {
    let spec = ProcessSpec::relativistic(1, 1.0, 1.0).unwrap();
    let x = draws(&spec, 1.0, 200_000, 3);
    for xi in [0.5, 1.0, 2.0, 4.0] {
        let c: Vec<f64> = x.iter().map(|v| (xi * v[0]).cos()).collect();
        let (m, se) = mean_se(&c);
        let want = (-((xi * xi + 1.0f64).sqrt() - 1.0)).exp();
        assert!((m - want).abs() < 3.0 * se, "ξ={xi}: {m} vs {want} (se {se})");
    }
}

#[test]
fn subordinator_laplace_transform() {
    let (alpha, m, dt) = (1.2, 0.7, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s: Vec<f64> = (0..200_000).map(|_| subordinator_increment(alpha, m, dt, &mut rng)).collect();
    let mm = m.powf(2.0 / alpha);
    for lam in [0.5, 1.0, 2.0, 4.0] {
        let e: Vec<f64> = s.iter().map(|v| (-lam * v).exp()).collect();
        let (mean, se) = mean_se(&e);
        let want = (-dt * ((lam + mm).powf(alpha / 2.0) - m)).exp();
        assert!((mean - want).abs() < 3.0 * se, "λ={lam}: {mean} vs {want}");
    }
}

#[test]
fn positive_stable_laplace_transform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s: Vec<f64> = (0..100_000).map(|_| positive_stable(0.6, &mut rng)).collect();
    for lam in [0.5, 2.0] {
        let (mean, se) = mean_se(&s.iter().map(|v| (-lam * v).exp()).collect::<Vec<_>>());
        assert!((mean - (-lam.powf(0.6)).exp()).abs() < 3.0 * se);
    }
}

#[test]
fn increments_compose() {
    // X_{1/2} + X'_{1/2} ~ X_1
    let n = 100_000;
    for spec in [ProcessSpec::stable(1, 1.5).unwrap(), ProcessSpec::relativistic(1, 1.0, 1.0).unwrap()] {
        let halves = draws(&spec, 0.5, 2 * n, 6);
        let sum: Vec<f64> = halves.chunks(2).map(|c| c[0][0] + c[1][0]).collect();
        let whole: Vec<f64> = draws(&spec, 1.0, n, 7).into_iter().map(|v| v[0]).collect();
        let d = ks_two_sample(sum, whole);
        // 1% critical value
        assert!(d < 1.63 * (2.0 / n as f64).sqrt(), "{}: {d}", spec.label());
    }
}

#[test]
fn exit_time_oracles() {
    let b3 = PathConfig::new(ProcessSpec::brownian(3), 1e-3, 50.0, 8, 100_000).with_domain(Domain::unit_ball(3));
    let e = exit_time_estimate(&b3, &[0.0; 3]).unwrap();
    assert!((e.value * 3.0 - 1.0).abs() < 0.02, "{} ± {}", e.value, e.se);

    let b1 = PathConfig::new(ProcessSpec::brownian(1), 1e-3, 50.0, 9, 100_000)
        .with_domain(Domain::interval(-1.0, 1.0).unwrap());
    let e = exit_time_estimate(&b1, &[0.0]).unwrap();
    assert!((e.value - 1.0).abs() < 0.02, "{} ± {}", e.value, e.se);
    assert_eq!(e.censored, 0);

    let near = exit_time_estimate(&b1, &[1.0 - 1e-6]).unwrap();
    assert!(near.value < 1e-2, "{}", near.value);
}

#[test]
fn green_probe_volume_cap() {
    let cfg = PathConfig::new(ProcessSpec::brownian(3), 2e-3, 50.0, 10, 10_000).with_domain(Domain::unit_ball(3));
    let pts = vec![vec![0.0; 3], vec![0.5, 0.0, 0.0]];
    let g = green_bounded_probe(&cfg, &pts).unwrap();
    let cap = 5.0 / (6.0 * PI) * 2.5f64.powf(2.0 / 3.0) * (4.0 * PI / 3.0f64).powf(2.0 / 3.0);
    assert!((g.volume_cap.unwrap() - cap).abs() < 1e-12);
    assert!((cap - 1.270).abs() < 1e-3);
    assert!(g.sup <= cap);
    assert_eq!(g.argmax, vec![0.0; 3]);

    let interval = PathConfig::new(ProcessSpec::brownian(1), 1e-3, 10.0, 11, 2_000)
        .with_domain(Domain::interval(0.0, 1.0).unwrap());
    assert!(green_bounded_probe(&interval, &[vec![0.5]]).unwrap().volume_cap.is_none());

    let strip = PathConfig::new(ProcessSpec::brownian(2), 1e-2, 10.0, 12, 2_000)
        .with_domain(Domain::strip(2, 1, 1.0).unwrap());
    let g = green_bounded_probe(&strip, &[vec![0.0, 0.0]]).unwrap();
    assert!(g.volume_cap.is_none());
    assert!(g.sup.is_finite());
}

#[test]
fn feynman_kac_constant_potential() {
    let cfg = PathConfig::new(ProcessSpec::stable(2, 1.2).unwrap(), 1e-2, 10.0, 13, 2_000);
    for (c, t) in [(0.5, 1.0), (2.0, 0.7)] {
        let e = feynman_kac(&cfg, |_| c, |_| 1.0, t, &[0.0, 0.0]).unwrap();
        assert!((e.value - (-c * t).exp()).abs() <= 3.0 * e.se + 1e-12, "{e:?}");
    }
    let free = feynman_kac(&cfg, |_| 0.0, |_| 1.0, 3.0, &[1.0, 1.0]).unwrap();
    assert_eq!(free.value, 1.0);
}

#[test]
fn feynman_kac_killing_on_the_interval() {
    // P_x(τ > t) = Σ_{k odd} 4/(kπ) sin(kπx) e^{-k²π²t/2}
    let (x, t) = (0.3, 0.1);
    let exact: f64 = (0..50)
        .map(|i| {
            let k = (2 * i + 1) as f64;
            4.0 / (k * PI) * (k * PI * x).sin() * (-k * k * PI * PI * t / 2.0).exp()
        })
        .sum();
    let cfg = PathConfig::new(ProcessSpec::brownian(1), 1e-3, 1.0, 14, 100_000)
        .with_domain(Domain::interval(0.0, 1.0).unwrap());
    let e = feynman_kac(&cfg, |_| 0.0, |_| 1.0, t, &[x]).unwrap();
    assert!((e.value - exact).abs() < 3.0 * e.se + 2e-3, "{} ± {} vs {exact}", e.value, e.se);
    let outside = feynman_kac(&cfg, |_| 0.0, |_| 1.0, t, &[1.5]).unwrap();
    assert_eq!(outside.value, 0.0);
}

#[test]
fn harmonic_decay_rate_in_one_dimension() {
    let cfg = PathConfig::new(ProcessSpec::brownian(1), 1e-2, 10.0, 15, 50_000);
    let v = Potential::Quadratic { coef: 0.5 };
    let r = fk_decay_rate(&cfg, |x| v.eval(x), |_| 1.0, &[1.0, 2.0, 4.0, 8.0], &[vec![0.0]]).unwrap();
    assert!((r.lambda0 / 0.5 - 1.0).abs() < 0.05, "{} ± {}", r.lambda0, r.se);
    assert!(r.se > 0.0);
}

#[test]
fn lifetime_tails() {
    let free = PathConfig::new(ProcessSpec::brownian(2), 1e-2, 5.0, 16, 2_000);
    let l = lifetime_tail(&free, |_| 0.0, 2.0, &[vec![0.0, 0.0], vec![3.0, -1.0]]).unwrap();
    assert_eq!(l.sup, 0.0);

    // reflection principle near a far-away-bounded wall
    let (eps, t) = (0.1, 0.01);
    let wall = PathConfig::new(ProcessSpec::brownian(1), 1e-4, 1.0, 17, 100_000)
        .with_domain(Domain::interval(0.0, 1000.0).unwrap());
    let l = lifetime_tail(&wall, |_| 0.0, t, &[vec![eps]]).unwrap();
    let exact = 2.0 * Normal::standard().sf(eps / t.sqrt());
    let e = &l.estimates[0];
    assert!((e.value - exact).abs() < 3.0 * e.se + 2e-3, "{} ± {} vs {exact}", e.value, e.se);
}

#[test]
fn traces_stay_on_the_time_grid() {
    let cfg = PathConfig::new(ProcessSpec::stable(2, 1.5).unwrap(), 0.05, 10.0, 18, 1)
        .with_domain(Domain::unit_ball(2));
    let path = sample_path(&cfg, &[0.0, 0.0], 1.0, 3).unwrap();
    assert_eq!(path[0].0, 0.0);
    assert!(path.windows(2).all(|w| (w[1].0 - w[0].0 - 0.05).abs() < 1e-12));
    let parsed = parse_trace(&trace_text(&cfg, &path)).unwrap();
    assert_eq!(parsed.len(), path.len());
    assert!(parsed[0].2);
    assert_eq!(sample_path(&cfg, &[0.0, 0.0], 1.0, 3).unwrap(), path);
}
