//! Special functions: Gamma, sphere/ball measures, spherical-cap fractions,
//! spherical Bessel functions and Legendre polynomials.

use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// `|S^{d-1}| = 2π^{d/2}/Γ(d/2)`, the surface area of the unit sphere in ℝ^d.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Lebesgue volume of the unit ball in ℝ^d.
pub fn ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

/// Fraction of `S^{d-1}` (d ≥ 2) whose angle to a fixed axis is below `theta0`.
pub fn cap_fraction(d: usize, theta0: f64) -> f64 {
    if theta0 <= 0.0 {
        return 0.0;
    }
    if theta0 >= PI {
        return 1.0;
    }
    match d {
        0 | 1 => {
            // S^0 = {±1}: the axis point is inside once θ0 > 0.
            0.5
        }
        2 => theta0 / PI,
        3 => 0.5 * (1.0 - theta0.cos()),
        _ => {
            let a = (d as f64 - 1.0) / 2.0;
            let s2 = theta0.sin().powi(2).clamp(0.0, 1.0);
            let half = 0.5 * statrs::function::beta::beta_reg(a, 0.5, s2);
            if theta0 <= PI / 2.0 {
                half
            } else {
                1.0 - half
            }
        }
    }
}

/// Fraction of the sphere `{y : |y - x| = s}` lying in the open ball
/// `B_rho(c)`, where `dist = |x - c|`. Valid for every d ≥ 1.
pub fn shell_fraction_in_ball(d: usize, dist: f64, s: f64, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    if s <= 0.0 {
        return if dist < rho { 1.0 } else { 0.0 };
    }
    if dist + s < rho {
        return 1.0;
    }
    if s >= dist + rho || dist >= s + rho {
        // sphere encloses the ball, or lies entirely outside it
        return 0.0;
    }
    if dist == 0.0 {
        return if s < rho { 1.0 } else { 0.0 };
    }
    if d == 1 {
        // two points x ± s, with x placed at +dist relative to c
        let p1 = (dist + s).abs() < rho;
        let p2 = (dist - s).abs() < rho;
        return 0.5 * (p1 as u8 as f64 + p2 as u8 as f64);
    }
    // |y - c|^2 = dist^2 + s^2 + 2 dist s cos φ  < rho^2  ⟺  cos φ < c0
    let c0 = (rho * rho - dist * dist - s * s) / (2.0 * dist * s);
    let c0 = c0.clamp(-1.0, 1.0);
    // {cos φ < c0} is a cap around the antipodal axis with half-angle acos(-c0)
    cap_fraction(d, (-c0).acos())
}

/// Spherical Bessel functions `j_0(ω), …, j_{n-1}(ω)` for `ω ≥ 0`.
pub fn spherical_bessel_j(n: usize, omega: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let w = omega.abs();
    if w == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if w < 0.5 {
        let mut dfact = 1.0; // (2k+1)!!
        let mut wk = 1.0;
        for (k, o) in out.iter_mut().enumerate() {
            if k > 0 {
                dfact *= (2 * k + 1) as f64;
                wk *= w;
            }
            let mut term = 1.0;
            let mut sum = 1.0;
            for l in 1..30 {
                term *= -(w * w / 2.0) / (l as f64 * (2 * k + 2 * l + 1) as f64);
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            *o = wk / dfact * sum;
        }
        return out;
    }
    let j0 = w.sin() / w;
    let j1 = w.sin() / (w * w) - w.cos() / w;
    if w > n as f64 {
        out[0] = j0;
        if n > 1 {
            out[1] = j1;
        }
        for k in 1..n.saturating_sub(1) {
            out[k + 1] = (2 * k + 1) as f64 / w * out[k] - out[k - 1];
        }
        return out;
    }
    // Miller's backward recurrence
    let start = n + 20 + w as usize;
    let mut jp1 = 0.0;
    let mut jk = 1e-300;
    let mut tmp = vec![0.0; start + 1];
    tmp[start] = jk;
    for k in (1..=start).rev() {
        let jm1 = (2 * k + 1) as f64 / w * jk - jp1;
        jp1 = jk;
        jk = jm1;
        tmp[k - 1] = jk;
        if jk.abs() > 1e250 {
            for t in tmp.iter_mut().skip(k - 1) {
                *t *= 1e-250;
            }
            jk *= 1e-250;
            jp1 *= 1e-250;
        }
    }
    let scale = if j0.abs() > 0.1 * j1.abs() {
        j0 / tmp[0]
    } else {
        j1 / tmp[1]
    };
    for k in 0..n {
        out[k] = tmp[k] * scale;
    }
    out
}

/// Legendre polynomials `P_0(u), …, P_{n-1}(u)`.
pub fn legendre_all(n: usize, u: f64) -> Vec<f64> {
    let mut p = vec![0.0; n];
    if n == 0 {
        return p;
    }
    p[0] = 1.0;
    if n > 1 {
        p[1] = u;
    }
    for k in 2..n {
        let kf = k as f64;
        p[k] = ((2.0 * kf - 1.0) * u * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf;
    }
    p
}

/// Bessel function `J_n(x)` of integer order, `x ≥ 0`.
///
/// Miller's backward recurrence normalized by `J_0 + 2ΣJ_{2k} = 1` for
/// moderate arguments, Hankel's asymptotic expansion for large ones.
pub fn bessel_j_int(n: usize, x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if x > 40.0 + nf * nf {
        return bessel_j_hankel(nf, x);
    }
    if x < 1e-3 {
        // two-term series
        let lead = (x / 2.0).powi(n as i32) / gamma(nf + 1.0);
        return lead * (1.0 - x * x / (4.0 * (nf + 1.0)));
    }
    let start = 2 * ((n.max(x as usize) + 16 + (40.0 * x).sqrt() as usize) / 2);
    let mut jp1 = 0.0;
    let mut jk = 1e-30;
    let mut norm = 0.0;
    let mut want = 0.0;
    for k in (1..=start).rev() {
        let jm1 = 2.0 * k as f64 / x * jk - jp1;
        jp1 = jk;
        jk = jm1;
        let km1 = k - 1;
        if km1 == n {
            want = jk;
        }
        if km1 > 0 && km1 % 2 == 0 {
            norm += 2.0 * jk;
        }
        if jk.abs() > 1e250 {
            jk *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            want *= 1e-250;
        }
    }
    norm += jk;
    want / norm
}

fn bessel_j_hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    for k in 1..30 {
        let kf = k as f64;
        term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if term.abs() < 1e-17 {
            break;
        }
        if k % 2 == 1 {
            q += if (k / 2) % 2 == 0 { term } else { -term };
        } else {
            p += if (k / 2) % 2 == 0 { term } else { -term };
        }
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Spherical mean of `e^{i ξ·x}` over `|ξ| = 1` as a function of `z = |x|`:
/// `Λ_d(z) = Γ(d/2) (2/z)^{d/2-1} J_{d/2-1}(z)`, with `Λ_d(0) = 1`.
pub fn spherical_mean(d: usize, z: f64) -> f64 {
    let z = z.abs();
    match d {
        1 => return z.cos(),
        3 => {
            return if z < 1e-4 {
                1.0 - z * z / 6.0
            } else {
                z.sin() / z
            }
        }
        _ => {}
    }
    let h = d as f64 / 2.0;
    if z < 1.0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let kf = k as f64;
            term *= -(z * z / 4.0) / (kf * (kf + h - 1.0));
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        return sum;
    }
    if d % 2 == 1 {
        let n = (d - 3) / 2;
        let j = spherical_bessel_j(n + 1, z)[n];
        gamma(h) * (2.0 / z).powf(h - 1.0) * (2.0 * z / PI).sqrt() * j
    } else {
        gamma(h) * (2.0 / z).powf(h - 1.0) * bessel_j_int(d / 2 - 1, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn cap_fraction_general_d_matches_closed_forms() {
        for &t in &[0.1f64, 0.7, 1.5, 2.0, 3.0] {
            // d=4: fraction = (θ - sinθ cosθ)/π
            let exact4 = (t - t.sin() * t.cos()) / PI;
            assert!((cap_fraction(4, t) - exact4).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn shell_fraction_limits() {
        assert_eq!(shell_fraction_in_ball(3, 0.0, 0.5, 1.0), 1.0);
        assert_eq!(shell_fraction_in_ball(3, 0.0, 1.5, 1.0), 0.0);
        // sphere through the centre of a ball of equal radius: cos φ < -1/2 ... fraction 1/4
        let f = shell_fraction_in_ball(3, 1.0, 1.0, 1.0);
        assert!((f - 0.25).abs() < 1e-14);
    }

    #[test]
    fn spherical_bessel_against_closed_forms() {
        for &w in &[0.01f64, 0.3, 1.0, 2.5, 7.0, 40.0] {
            let j = spherical_bessel_j(6, w);
            let j0 = w.sin() / w;
            let j1 = w.sin() / (w * w) - w.cos() / w;
            let j2 = (3.0 / (w * w) - 1.0) * w.sin() / w - 3.0 * w.cos() / (w * w);
            assert!((j[0] - j0).abs() < 1e-13, "w={w}");
            assert!((j[1] - j1).abs() < 1e-13, "w={w}");
            assert!((j[2] - j2).abs() < 1e-10 * (1.0 + j2.abs()), "w={w} {} {}", j[2], j2);
        }
    }

    #[test]
    fn spherical_bessel_high_order_small_argument() {
        // j_15(2) ≈ 2^15 / 31!! to leading order
        let j = spherical_bessel_j(16, 2.0);
        let mut df = 1.0;
        for k in (1..=31).step_by(2) {
            df *= k as f64;
        }
        let lead = 2f64.powi(15) / df * (1.0 - 4.0 / (2.0 * 33.0));
        assert!((j[15] / lead - 1.0).abs() < 5e-3);
    }

    #[test]
    fn integer_bessel_reference_values() {
        // J_0(1), J_1(2.5), J_0(50), J_2(10) from standard tables
        assert!((bessel_j_int(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-13);
        assert!((bessel_j_int(1, 2.5) - 0.497_094_102_464_274_3).abs() < 1e-13);
        assert!((bessel_j_int(0, 50.0) - 0.055_812_327_669_251_85).abs() < 1e-12);
        assert!((bessel_j_int(2, 10.0) - 0.254_630_313_685_120_6).abs() < 1e-12);
        // continuity across the Hankel switch
        let a = bessel_j_int(1, 41.0 - 1e-9);
        let b = bessel_j_int(1, 41.0 + 1e-9);
        assert!((a - b).abs() < 1e-9, "{a} {b}");
        assert!((bessel_j_int(1, 100.0) - (-0.077_145_352_014_112_16)).abs() < 1e-13);
        assert!((bessel_j_int(2, 60.0) - 0.093_025_083_547_667_42).abs() < 1e-13);
    }

    #[test]
    fn spherical_mean_limits() {
        for d in 1..=6 {
            assert!((spherical_mean(d, 0.0) - 1.0).abs() < 1e-15);
            // continuity across the series switch
            let a = spherical_mean(d, 1.0 - 1e-9);
            let b = spherical_mean(d, 1.0 + 1e-9);
            assert!((a - b).abs() < 1e-8, "d={d} {a} {b}");
        }
        assert!((spherical_mean(2, 3.0) - bessel_j_int(0, 3.0)).abs() < 1e-15);
    }
}
