//! Kernel invariant suite: Chapman–Kolmogorov, conservativeness, the
//! resolvent equation and symmetry, checked by radial quadrature.

use crate::error::{Error, Result};
use crate::kernels::{heat_kernel, heat_kernel_radial, resolvent_kernel_radial, ProcessKind, ProcessSpec};
use crate::quad::{semi_infinite, Tolerance};
use crate::special::sphere_area;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Relative (or absolute, for masses) defect.
    pub defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: String, defect: f64, tolerance: f64) -> Self {
        Check {
            name,
            defect,
            tolerance,
            pass: defect <= tolerance,
        }
    }
}

/// Processes covered by the suite.
pub fn catalogue() -> Vec<ProcessSpec> {
    vec![
        ProcessSpec::brownian(1),
        ProcessSpec::brownian(3),
        ProcessSpec::stable(1, 1.5).expect("valid"),
        ProcessSpec::stable(3, 1.0).expect("valid"),
        ProcessSpec::relativistic(1, 1.5, 0.5).expect("valid"),
        ProcessSpec::relativistic(3, 1.0, 1.0).expect("valid"),
    ]
}

pub const CK_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
pub const CK_RADII: [f64; 3] = [0.3, 1.0, 3.0];
pub const CK_TOL: f64 = 1e-3;
pub const MASS_TOL: f64 = 1e-6;
pub const RESOLVENT_TOL: f64 = 1e-3;

fn tight() -> Tolerance {
    Tolerance::new(1e-9, 1e-15).with_max_subdivisions(2000)
}

/// `∫_0^a g(u) u du` tabulated on `a = L sinh(v)` with Hermite interpolation.
struct Cumulative {
    a: Vec<f64>,
    v: Vec<f64>,
    dv: Vec<f64>,
}

impl Cumulative {
    fn new(g: &dyn Fn(f64) -> f64, scale: f64) -> Self {
        const N: usize = 3000;
        let vmax = (1e4f64).asinh();
        let node = |i: f64| scale * (i * vmax / N as f64).sinh();
        let h = |u: f64| if u > 0.0 { g(u) * u } else { 0.0 };
        let mut a = Vec::with_capacity(N + 1);
        let mut v = Vec::with_capacity(N + 1);
        let mut dv = Vec::with_capacity(N + 1);
        let mut acc = 0.0;
        let mut prev = h(0.0);
        a.push(0.0);
        v.push(0.0);
        dv.push(prev);
        for i in 1..=N {
            let (x0, x1) = (node((i - 1) as f64), node(i as f64));
            let cur = h(x1);
            acc += (x1 - x0) / 6.0 * (prev + 4.0 * h(0.5 * (x0 + x1)) + cur);
            a.push(x1);
            v.push(acc);
            dv.push(cur);
            prev = cur;
        }
        Cumulative { a, v, dv }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.a.len() - 1;
        if x >= self.a[n] {
            return self.v[n];
        }
        let i = self.a.partition_point(|&a| a <= x).clamp(1, n) - 1;
        let (x0, x1) = (self.a[i], self.a[i + 1]);
        let w = x1 - x0;
        let s = (x - x0) / w;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.v[i]
            + (s3 - 2.0 * s2 + s) * w * self.dv[i]
            + (-2.0 * s3 + 3.0 * s2) * self.v[i + 1]
            + (s3 - s2) * w * self.dv[i + 1]
    }
}

/// `∫_{ℝ^d} f(|z|) g(|z - r e|) dz` for radial `f`, `g` in `d ∈ {1, 3}`, `r > 0`.
fn radial_convolution(
    d: usize,
    f: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    r: f64,
    scale: f64,
) -> Result<f64> {
    let q = match d {
        1 => semi_infinite(|rho| f(rho) * (g((rho - r).abs()) + g(rho + r)), 0.0, scale.max(r), &[r], tight()),
        3 => {
            let cum = Cumulative::new(g, scale);
            let q = semi_infinite(
                |rho| {
                    if rho == 0.0 {
                        return 0.0;
                    }
                    f(rho) * rho * (cum.eval(rho + r) - cum.eval((rho - r).abs()))
                },
                0.0,
                scale.max(r),
                &[r],
                tight(),
            );
            return Ok(2.0 * PI / r * q.value);
        }
        _ => return Err(Error::Unsupported(format!("radial convolution in d = {d}"))),
    };
    Ok(q.value)
}

fn time_scale(spec: &ProcessSpec, t: f64) -> f64 {
    t.powf(1.0 / spec.index())
}

/// `r ↦ p_t(r)`, cut to zero where a relativistic (exponentially decaying,
/// Fourier-inverted) kernel falls below its quadrature noise floor.
fn heat_profile(spec: &ProcessSpec, t: f64) -> impl Fn(f64) -> f64 + '_ {
    let p = move |u: f64| heat_kernel_radial(spec, t, u).map(|k| k.value).unwrap_or(f64::NAN);
    let cut = if matches!(spec.kind, ProcessKind::Relativistic { .. }) {
        let d = spec.dim as i32;
        let mut r = time_scale(spec, t);
        while sphere_area(spec.dim) * p(r) * r.powi(d) > 1e-12 {
            r *= 1.25;
        }
        r
    } else {
        f64::INFINITY
    };
    move |u| if u > cut { 0.0 } else { p(u) }
}

/// Relative Chapman–Kolmogorov defect at `(t, s, r)`.
pub fn chapman_kolmogorov_defect(spec: &ProcessSpec, t: f64, s: f64, r: f64) -> Result<f64> {
    let ps = heat_profile(spec, s);
    let pt = heat_profile(spec, t);
    let conv = radial_convolution(spec.dim, &ps, &pt, r, time_scale(spec, s.min(t)))?;
    let direct = heat_kernel_radial(spec, t + s, r)?.value;
    Ok((conv - direct).abs() / direct)
}

/// `|∫ p_t(x, y) dy - 1|`.
pub fn mass_defect(spec: &ProcessSpec, t: f64) -> Result<f64> {
    let d = spec.dim;
    let p = heat_profile(spec, t);
    let q = semi_infinite(
        |u| p(u) * u.powi(d as i32 - 1),
        0.0,
        time_scale(spec, t),
        &[],
        tight(),
    );
    Ok((sphere_area(d) * q.value - 1.0).abs())
}

/// Relative defect of `R_a - R_b = (b - a) R_a R_b` at `r`.
pub fn resolvent_defect(spec: &ProcessSpec, a: f64, b: f64, r: f64) -> Result<f64> {
    let ra = |u: f64| resolvent_kernel_radial(spec, a, u).map(|k| k.value).unwrap_or(f64::NAN);
    let rb = |u: f64| resolvent_kernel_radial(spec, b, u).map(|k| k.value).unwrap_or(f64::NAN);
    let conv = radial_convolution(spec.dim, &ra, &rb, r, time_scale(spec, 1.0 / a.max(b)))?;
    let lhs = ra(r) - rb(r) + (a - b) * conv;
    Ok(lhs.abs() / rb(r))
}

/// Full suite; every check carries its own tolerance.
pub fn kernels_selftest() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for spec in catalogue() {
        let label = spec.label();
        let mut worst: f64 = 0.0;
        for &t in &CK_TIMES {
            for &s in &CK_TIMES {
                for &r in &CK_RADII {
                    worst = worst.max(chapman_kolmogorov_defect(&spec, t, s, r)?);
                }
            }
        }
        out.push(Check::new(format!("chapman-kolmogorov {label}"), worst, CK_TOL));
        let mut worst: f64 = 0.0;
        for &t in &CK_TIMES {
            worst = worst.max(mass_defect(&spec, t)?);
        }
        out.push(Check::new(format!("sub-markov {label}"), worst, MASS_TOL));
        if spec.dim == 1 || matches!(spec.kind, ProcessKind::Brownian) {
            let mut worst: f64 = 0.0;
            for &r in &CK_RADII {
                worst = worst.max(resolvent_defect(&spec, 1.0, 2.0, r)?);
            }
            out.push(Check::new(format!("resolvent equation {label}"), worst, RESOLVENT_TOL));
        }
        let (x, y) = (vec![0.2; spec.dim], vec![-0.4; spec.dim]);
        let asym = (heat_kernel(&spec, 1.0, &x, &y)?.value - heat_kernel(&spec, 1.0, &y, &x)?.value).abs();
        out.push(Check::new(format!("symmetry {label}"), asym, 0.0));
    }
    let k = 2f64.sqrt();
    let b1 = ProcessSpec::brownian(1);
    let worst = [0.0, 0.5, 1.0, 3.0]
        .iter()
        .map(|&r| {
            let exact = (-k * r).exp() / k;
            resolvent_kernel_radial(&b1, 1.0, r).map(|v| (v.value - exact).abs() / exact)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(Check::new("brownian(d=1) R_1 closed form".into(), worst, 1e-6));
    Ok(out)
}
