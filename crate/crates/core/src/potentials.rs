//! p-potentials `∫ k(x, y)^p μ(dy)` of radial kernels, their suprema over
//! `x`, local and tail decay profiles, and class verdicts.
//!
//! Rotationally symmetric configurations (Lebesgue or radial densities on
//! balls, exteriors and annuli, sphere surface measures) are reduced to
//! one-dimensional integrals in `s = |y - x|` that are exact in every
//! dimension. Everything else goes through [`MeasureSpec::integrate_with`].

use crate::error::{check_dim, Error, Result};
use crate::geometry::{
    dist2, DensityFn, Domain, DomainKind, Integral, MeasureKind, MeasureSpec, QuadStatus,
    SingularOrder, Singularity,
};
use crate::kernels::{FarDecay, KernelSpec, ProcessKind, ProcessSpec, RadialKernel};
use crate::profile::{DecayProfile, DecisionRule, Limit, Verdict};
use crate::quad::{self, QuadResult, Tolerance};
use crate::special::{gamma, shell_fraction_in_ball, sphere_area};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const POT_TOL: Tolerance = Tolerance {
    rel: 1e-8,
    abs: 0.0,
    max_subdivisions: 2000,
};

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

/// Ball `{y : |y - center| < radius}`; as an exclusion it removes the open ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Integration region; constraints intersect.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Keep `|y - x| < r`, relative to the evaluation point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within: Option<f64>,
    /// Keep `|y - o| ≥ R`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outside: Option<Ball>,
    /// Keep `y ∈ set`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<Domain>,
}

impl Region {
    pub fn all() -> Self {
        Region::default()
    }

    pub fn near(r: f64) -> Self {
        Region {
            within: Some(r),
            ..Region::default()
        }
    }

    pub fn tail(origin: Vec<f64>, radius: f64) -> Self {
        Region {
            outside: Some(Ball {
                center: origin,
                radius,
            }),
            ..Region::default()
        }
    }

    pub fn in_set(set: Domain) -> Self {
        Region {
            set: Some(set),
            ..Region::default()
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let Some(r) = self.within {
            if !(r > 0.0) {
                return Err(Error::param("within", "radius must be positive"));
            }
        }
        if let Some(b) = &self.outside {
            check_dim(dim, b.center.len())?;
            if !(b.radius >= 0.0) {
                return Err(Error::param("outside", "radius must be ≥ 0"));
            }
        }
        if let Some(s) = &self.set {
            check_dim(dim, s.dim)?;
            s.validate()?;
        }
        Ok(())
    }

    /// The region seen from `x`, as a single domain (`None` = everything).
    fn as_domain(&self, dim: usize, x: &[f64]) -> Result<Option<Domain>> {
        let mut parts = Vec::new();
        if let Some(r) = self.within {
            parts.push(Domain::ball(x.to_vec(), r)?);
        }
        if let Some(b) = &self.outside {
            if b.radius > 0.0 {
                parts.push(Domain::exterior(b.center.clone(), b.radius)?);
            }
        }
        if let Some(s) = &self.set {
            parts.push(s.clone());
        }
        Ok(match parts.len() {
            0 => None,
            1 => parts.pop(),
            _ => Some(Domain::intersection(parts).map(|mut d| {
                d.dim = dim;
                d
            })?),
        })
    }

    fn contains(&self, x: &[f64], y: &[f64]) -> bool {
        if let Some(r) = self.within {
            if dist2(x, y) >= r * r {
                return false;
            }
        }
        if let Some(b) = &self.outside {
            if dist2(&b.center, y) < b.radius * b.radius {
                return false;
            }
        }
        self.set.as_ref().is_none_or(|s| s.contains_unchecked(y))
    }
}

// ---------------------------------------------------------------------------
// p-potentials
// ---------------------------------------------------------------------------

/// `∫_region k(x, y)^p μ(dy)`, `+∞` (status `Infinite`) when the local
/// singularity or the tail makes the integral diverge.
pub fn p_potential(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    x: &[f64],
    region: &Region,
) -> Result<Integral> {
    check_p(p)?;
    check_args(kernel, measure, x, region)?;
    potential(kernel, p, measure, x, region)
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::param("p", "need 1 ≤ p < ∞"));
    }
    Ok(())
}

fn check_args(kernel: &RadialKernel, measure: &MeasureSpec, x: &[f64], region: &Region) -> Result<()> {
    check_dim(kernel.dim(), measure.dim)?;
    check_dim(measure.dim, x.len())?;
    measure.validate()?;
    region.validate(measure.dim)
}

/// `p = 0` gives `μ(region)`.
fn potential(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    x: &[f64],
    region: &Region,
) -> Result<Integral> {
    let kp = |r: f64| -> f64 {
        if p == 0.0 {
            1.0
        } else {
            kernel.eval(r).powf(p)
        }
    };
    match &measure.kind {
        MeasureKind::Mixture { components } => {
            let mut acc = zero_integral();
            for c in components.iter().filter(|c| c.weight > 0.0) {
                let part = potential(kernel, p, &c.measure, x, region)?;
                acc = add_integrals(acc, part, c.weight);
            }
            Ok(acc)
        }
        MeasureKind::Atoms { atoms } => {
            let mut v = 0.0;
            for a in atoms.iter().filter(|a| a.mass > 0.0 && region.contains(x, &a.point)) {
                v += a.mass * kp(dist2(x, &a.point).sqrt());
            }
            Ok(finite_or_infinite(v, 0.0, true))
        }
        MeasureKind::SphereSurface { center, radius } => {
            if measure.dim == 1 {
                let v: f64 = [center[0] - radius, center[0] + radius]
                    .iter()
                    .filter(|&&y| region.contains(x, &[y]))
                    .map(|&y| kp((x[0] - y).abs()))
                    .sum();
                return Ok(finite_or_infinite(v, 0.0, true));
            }
            match sphere_config(measure.dim, center, *radius, region) {
                Some(inside) => {
                    if !inside {
                        return Ok(zero_integral());
                    }
                    Ok(sphere_potential(kernel, p, measure.dim, center, *radius, x, region.within))
                }
                None => generic_potential(kernel, p, measure, x, region),
            }
        }
        MeasureKind::Lebesgue { .. } | MeasureKind::Density { .. } => {
            match radial_config(measure, region) {
                Some(cfg) => Ok(radial_potential(kernel, p, measure.dim, &cfg, x, region.within)),
                None => generic_potential(kernel, p, measure, x, region),
            }
        }
    }
}

fn zero_integral() -> Integral {
    Integral {
        value: 0.0,
        error: 0.0,
        status: QuadStatus::Converged,
    }
}

fn finite_or_infinite(v: f64, err: f64, converged: bool) -> Integral {
    Integral {
        value: v,
        error: err,
        status: if v.is_infinite() {
            QuadStatus::Infinite
        } else if converged {
            QuadStatus::Converged
        } else {
            QuadStatus::Inconclusive
        },
    }
}

fn from_quad(q: QuadResult) -> Integral {
    finite_or_infinite(q.value, q.error, q.converged)
}

fn add_integrals(a: Integral, b: Integral, w: f64) -> Integral {
    let value = a.value + w * b.value;
    let status = if value.is_infinite() {
        QuadStatus::Infinite
    } else if a.status == QuadStatus::Inconclusive || b.status == QuadStatus::Inconclusive {
        QuadStatus::Inconclusive
    } else {
        QuadStatus::Converged
    };
    Integral {
        value,
        error: a.error + w * b.error,
        status,
    }
}

fn generic_potential(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    x: &[f64],
    region: &Region,
) -> Result<Integral> {
    let dom = region.as_domain(measure.dim, x)?;
    let f = |y: &[f64]| -> f64 {
        if p == 0.0 {
            1.0
        } else {
            kernel.eval(dist2(x, y).sqrt()).powf(p)
        }
    };
    let order = if p == 0.0 {
        SingularOrder::Bounded
    } else {
        kernel.singularity().pow(p)
    };
    let sing = [Singularity {
        point: x.to_vec(),
        order,
    }];
    let tol = Tolerance::new(1e-7, 0.0).with_max_subdivisions(400);
    measure.integrate_with(Some(&f), dom.as_ref(), &sing, tol)
}

// ---------------------------------------------------------------------------
// Exact radial reduction
// ---------------------------------------------------------------------------

/// Lebesgue-type measure restricted to the annulus `r_lo ≤ |y - c| < r_hi`
/// with a density radial about `c`.
#[derive(Debug, Clone)]
struct RadialConfig {
    /// `None`: translation invariant.
    center: Option<Vec<f64>>,
    r_lo: f64,
    r_hi: f64,
    density: RadialDensity,
}

#[derive(Debug, Clone)]
enum RadialDensity {
    Constant(f64),
    Radial(DensityFn),
}

impl RadialDensity {
    fn eval(&self, rho: f64) -> f64 {
        match self {
            RadialDensity::Constant(v) => *v,
            RadialDensity::Radial(g) => g.radial(rho),
        }
    }

    /// Power-law decay exponent at infinity (`∞` for exponential decay).
    fn decay(&self) -> f64 {
        match self {
            RadialDensity::Constant(_) => 0.0,
            RadialDensity::Radial(g) => match *g {
                DensityFn::Exponential { rate, .. } if rate > 0.0 => f64::INFINITY,
                DensityFn::Gaussian { .. } => f64::INFINITY,
                DensityFn::PowerTail { exponent, .. } => exponent,
                _ => 0.0,
            },
        }
    }

    fn scale(&self) -> Option<f64> {
        match self {
            RadialDensity::Constant(_) => None,
            RadialDensity::Radial(g) => match *g {
                DensityFn::Exponential { rate, .. } if rate > 0.0 => Some(1.0 / rate),
                DensityFn::Gaussian { width, .. } => Some(width),
                DensityFn::PowerTail { .. } => Some(1.0),
                _ => None,
            },
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            RadialDensity::Constant(v) => *v == 0.0,
            RadialDensity::Radial(g) => g.sup() == 0.0,
        }
    }
}

#[derive(Default)]
struct Constraints {
    center: Option<Vec<f64>>,
    r_lo: f64,
    r_hi: f64,
    ok: bool,
}

impl Constraints {
    fn new() -> Self {
        Constraints {
            center: None,
            r_lo: 0.0,
            r_hi: f64::INFINITY,
            ok: true,
        }
    }

    fn set_center(&mut self, c: &[f64]) {
        match &self.center {
            None => self.center = Some(c.to_vec()),
            Some(c0) => {
                let scale = c0.iter().chain(c).fold(1.0f64, |m, v| m.max(v.abs()));
                if dist2(c0, c).sqrt() > 1e-12 * scale {
                    self.ok = false;
                }
            }
        }
    }

    fn inside(&mut self, c: &[f64], r: f64) {
        self.set_center(c);
        self.r_hi = self.r_hi.min(r);
    }

    fn outside(&mut self, c: &[f64], r: f64) {
        self.set_center(c);
        self.r_lo = self.r_lo.max(r);
    }

    fn domain(&mut self, d: &Domain) {
        match &d.kind {
            DomainKind::FullSpace => {}
            DomainKind::Ball { center, radius } => self.inside(center, *radius),
            DomainKind::Exterior { center, radius } => self.outside(center, *radius),
            DomainKind::Intersection { parts } => {
                for p in parts {
                    self.domain(p);
                }
            }
            _ => self.ok = false,
        }
    }
}

fn radial_config(measure: &MeasureSpec, region: &Region) -> Option<RadialConfig> {
    let mut c = Constraints::new();
    let density = match &measure.kind {
        MeasureKind::Lebesgue { domain } => {
            c.domain(domain);
            RadialDensity::Constant(1.0)
        }
        MeasureKind::Density { domain, density } => {
            c.domain(domain);
            match density {
                DensityFn::Constant { value } => RadialDensity::Constant(*value),
                g => {
                    c.set_center(g.center().expect("radial density"));
                    RadialDensity::Radial(g.clone())
                }
            }
        }
        _ => return None,
    };
    if let Some(s) = &region.set {
        c.domain(s);
    }
    if let Some(b) = &region.outside {
        if b.radius > 0.0 {
            c.outside(&b.center, b.radius);
        }
    }
    if !c.ok {
        return None;
    }
    Some(RadialConfig {
        center: c.center,
        r_lo: c.r_lo,
        r_hi: c.r_hi,
        density,
    })
}

/// Fraction of the sphere `|y - x| = s` inside the closed-open annulus,
/// weighted by the density, for `x` at distance `dd` from the centre.
fn shell_mean(d: usize, cfg: &RadialConfig, dd: f64, s: f64) -> f64 {
    let (lo, hi) = (cfg.r_lo, cfg.r_hi);
    let in_annulus = |rho: f64| rho >= lo && rho < hi;
    if cfg.center.is_none() || dd == 0.0 {
        let rho = if cfg.center.is_none() { f64::NAN } else { s };
        if cfg.center.is_some() && !in_annulus(rho) {
            return 0.0;
        }
        return cfg.density.eval(if rho.is_nan() { 0.0 } else { rho });
    }
    match &cfg.density {
        RadialDensity::Constant(v) => {
            let frac = |r: f64| {
                if r == 0.0 {
                    0.0
                } else if r.is_infinite() {
                    1.0
                } else {
                    shell_fraction_in_ball(d, dd, s, r)
                }
            };
            v * (frac(hi) - frac(lo)).max(0.0)
        }
        RadialDensity::Radial(g) => {
            if d == 1 {
                let a = (dd + s).abs();
                let b = (dd - s).abs();
                let f = |rho: f64| if in_annulus(rho) { g.radial(rho) } else { 0.0 };
                return 0.5 * (f(a) + f(b));
            }
            // ρ(φ)² = D² + s² + 2Ds cos φ, weight sin^{d-2} φ
            let mut breaks = Vec::new();
            for r in [lo, hi] {
                if r > 0.0 && r.is_finite() {
                    let c = (r * r - dd * dd - s * s) / (2.0 * dd * s);
                    if c.abs() < 1.0 {
                        breaks.push(c.acos());
                    }
                }
            }
            let k = d as i32 - 2;
            let f = |phi: f64| {
                let rho2 = dd * dd + s * s + 2.0 * dd * s * phi.cos();
                let rho = rho2.max(0.0).sqrt();
                if !in_annulus(rho) {
                    return 0.0;
                }
                g.radial(rho) * phi.sin().powi(k)
            };
            let q = quad::adaptive_with_breaks(f, 0.0, PI, &breaks, Tolerance::new(1e-10, 0.0));
            q.value / sine_power_integral(d)
        }
    }
}

/// `∫_0^π sin^{d-2} φ dφ = √π Γ((d-1)/2)/Γ(d/2)`.
fn sine_power_integral(d: usize) -> f64 {
    let df = d as f64;
    PI.sqrt() * gamma((df - 1.0) / 2.0) / gamma(df / 2.0)
}

fn radial_potential(
    kernel: &RadialKernel,
    p: f64,
    d: usize,
    cfg: &RadialConfig,
    x: &[f64],
    within: Option<f64>,
) -> Integral {
    if cfg.r_lo >= cfg.r_hi || cfg.density.is_zero() {
        return zero_integral();
    }
    let dd = cfg.center.as_ref().map_or(0.0, |c| dist2(x, c).sqrt());
    let df = d as f64;
    // s-range where the shell can meet the annulus
    let mut s_min: f64 = 0.0;
    let mut s_max = within.unwrap_or(f64::INFINITY);
    if cfg.center.is_some() {
        if dd < cfg.r_lo {
            s_min = cfg.r_lo - dd;
        }
        if cfg.r_hi.is_finite() {
            s_max = s_max.min(dd + cfg.r_hi);
            if dd > cfg.r_hi {
                s_min = s_min.max(dd - cfg.r_hi);
            }
        }
    }
    if s_min >= s_max {
        return zero_integral();
    }
    let order = if p == 0.0 {
        SingularOrder::Bounded
    } else {
        kernel.singularity().pow(p)
    };
    let kp = |r: f64| if p == 0.0 { 1.0 } else { kernel.eval(r).powf(p) };
    let integrand = |s: f64| -> f64 {
        let a = shell_mean(d, cfg, dd, s);
        if a == 0.0 {
            return 0.0;
        }
        kp(s) * a * s.powi(d as i32 - 1)
    };
    // x in the closed support: local divergence test
    if s_min == 0.0 && !matches!(order, SingularOrder::Bounded) {
        let probe = 1e-9 * s_max.clamp(1e-300, 1.0);
        let local = shell_mean(d, cfg, dd, probe);
        if local > 0.0 && order.diverges_in(df) {
            return Integral::infinite();
        }
    }
    // tail divergence
    if s_max.is_infinite() {
        let dens = cfg.density.decay();
        let kern = match kernel.far_decay() {
            FarDecay::Compact | FarDecay::Exponential => f64::INFINITY,
            FarDecay::Power(g) => g * p,
        };
        if kern + dens <= df {
            return Integral::infinite();
        }
    }
    let mut breaks = vec![];
    for r in [cfg.r_lo, cfg.r_hi] {
        if r > 0.0 && r.is_finite() && cfg.center.is_some() {
            breaks.push((dd - r).abs());
            breaks.push(dd + r);
        }
    }
    if cfg.center.is_some() && dd > 0.0 {
        breaks.push(dd);
    }
    let ell = kernel.length_scale();
    breaks.extend([1e-3 * ell, 1e-2 * ell, 0.1 * ell, ell, 10.0 * ell]);
    if let Some(sc) = cfg.density.scale() {
        breaks.extend([sc, 10.0 * sc]);
    }
    if matches!(kernel.far_decay(), FarDecay::Compact) {
        breaks.push(1.0);
    }
    breaks.retain(|&b| b > s_min && b < s_max && b.is_finite());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let area = sphere_area(d);
    let mut total = QuadResult::zero();
    let mut lo = s_min;
    if s_min == 0.0 {
        let first = breaks.first().copied().unwrap_or(s_max.min(1.0)).min(s_max);
        let exponent = (df - 1.0) - order.gamma();
        total = quad::power_singular_left(integrand, 0.0, first, exponent, &[], POT_TOL);
        lo = first;
    }
    if s_max.is_finite() {
        if s_max > lo {
            total = total + quad::adaptive_with_breaks(integrand, lo, s_max, &breaks, POT_TOL);
        }
    } else {
        let far = breaks.last().copied().unwrap_or(1.0).max(lo) * 2.0 + 1.0;
        if far > lo {
            total = total + quad::adaptive_with_breaks(integrand, lo, far, &breaks, POT_TOL);
        }
        total = total + quad::semi_infinite(integrand, far, far.max(ell), &[], POT_TOL);
    }
    from_quad(total.scale(area))
}

/// `Some(true)` when the whole sphere lies in the centred constraints of
/// the region, `Some(false)` when none of it does, `None` when the region
/// cuts the sphere in a way the radial reduction cannot express.
fn sphere_config(d: usize, center: &[f64], radius: f64, region: &Region) -> Option<bool> {
    let mut c = Constraints::new();
    c.set_center(center);
    if let Some(s) = &region.set {
        c.domain(s);
    }
    if let Some(b) = &region.outside {
        if b.radius > 0.0 {
            c.outside(&b.center, b.radius);
        }
    }
    let _ = d;
    if !c.ok {
        return None;
    }
    Some(radius >= c.r_lo && radius < c.r_hi)
}

fn sphere_potential(
    kernel: &RadialKernel,
    p: f64,
    d: usize,
    center: &[f64],
    radius: f64,
    x: &[f64],
    within: Option<f64>,
) -> Integral {
    let df = d as f64;
    let dd = dist2(x, center).sqrt();
    let total_area = sphere_area(d) * radius.powi(d as i32 - 1);
    let kp = |r: f64| if p == 0.0 { 1.0 } else { kernel.eval(r).powf(p) };
    if dd == 0.0 {
        if within.is_some_and(|w| radius >= w) {
            return zero_integral();
        }
        return finite_or_infinite(total_area * kp(radius), 0.0, true);
    }
    // |y - x|² = (D - R)² + 4DR sin²(ψ/2)
    let gap = dd - radius;
    let mut psi_max = PI;
    if let Some(w) = within {
        if w <= gap.abs() {
            return zero_integral();
        }
        // s < w  ⟺  sin²(ψ/2) < (w - gap)(w + gap) / (4DR)
        let h = ((w - gap.abs()) * (w + gap.abs()) / (4.0 * dd * radius)).sqrt();
        if h < 1.0 {
            psi_max = 2.0 * h.asin();
        }
    }
    let order = if p == 0.0 {
        SingularOrder::Bounded
    } else {
        kernel.singularity().pow(p)
    };
    let on_sphere = gap.abs() <= 1e-12 * radius.max(1.0);
    if on_sphere && order.diverges_in(df - 1.0) {
        return Integral::infinite();
    }
    let k = d as i32 - 2;
    let integrand = |psi: f64| -> f64 {
        let h = (0.5 * psi).sin();
        let s = gap.hypot(2.0 * (dd * radius).sqrt() * h);
        kp(s) * psi.sin().powi(k)
    };
    let scale = radius.powi(d as i32 - 1) * sphere_area(d - 1);
    let rel = (gap.abs() / radius.min(dd)).max(1e-300);
    let mut breaks: Vec<f64> = [rel, 10.0 * rel, 0.1, 1.0]
        .into_iter()
        .filter(|&b| b > 1e-12 && b < psi_max)
        .collect();
    breaks.sort_by(f64::total_cmp);
    let q = if on_sphere && !matches!(order, SingularOrder::Bounded) {
        let first = breaks.first().copied().unwrap_or(psi_max).min(psi_max);
        let exponent = (df - 2.0) - order.gamma();
        let head = quad::power_singular_left(integrand, 0.0, first, exponent, &[], POT_TOL);
        if psi_max > first {
            head + quad::adaptive_with_breaks(integrand, first, psi_max, &breaks, POT_TOL)
        } else {
            head
        }
    } else {
        quad::adaptive_with_breaks(integrand, 0.0, psi_max, &breaks, POT_TOL)
    };
    from_quad(q.scale(scale))
}

// ---------------------------------------------------------------------------
// Suprema over x
// ---------------------------------------------------------------------------

/// Search strategy for `sup_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupSearch {
    /// Restrict `x` to the support of the restricted measure when the
    /// region does not move with `x`.
    pub frostman: bool,
    /// Grid points per axis (radial searches use `2·grid`).
    pub grid: usize,
    /// Number of best grid points refined by local search.
    pub starts: usize,
    pub seed: u64,
}

impl Default for SupSearch {
    fn default() -> Self {
        SupSearch {
            frostman: true,
            grid: 20,
            starts: 4,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub status: QuadStatus,
    /// Heuristic search without symmetry or support reduction.
    pub low_confidence: bool,
    pub evaluations: usize,
}

/// `sup_x ∫_region k(x, y)^p μ(dy)` with its maximiser.
pub fn sup_p_potential(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    region: &Region,
    search: &SupSearch,
) -> Result<SupResult> {
    check_p(p)?;
    let zero = vec![0.0; measure.dim];
    check_args(kernel, measure, &zero, region)?;
    sup_potential(kernel, p, measure, region, search)
}

fn sup_potential(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    region: &Region,
    search: &SupSearch,
) -> Result<SupResult> {
    let d = measure.dim;
    if measure.is_zero() {
        return Ok(SupResult {
            value: 0.0,
            argmax: vec![0.0; d],
            status: QuadStatus::Converged,
            low_confidence: false,
            evaluations: 0,
        });
    }
    if let (FarDecay::Power(g), None) = (kernel.far_decay(), region.within) {
        if g < 0.0 {
            // a growing kernel over a fixed region is unbounded in x
            let x = vec![0.0; d];
            let v = potential(kernel, p, measure, &x, region)?;
            let value = if v.value > 0.0 { f64::INFINITY } else { 0.0 };
            return Ok(SupResult {
                value,
                argmax: x,
                status: if value > 0.0 { QuadStatus::Infinite } else { QuadStatus::Converged },
                low_confidence: false,
                evaluations: 1,
            });
        }
    }
    if let Some(sym) = symmetry(measure, region) {
        return radial_sup(kernel, p, measure, region, search, &sym);
    }
    grid_sup(kernel, p, measure, region, search)
}

/// Rotational symmetry about a common centre: `Some(None)` means full
/// translation invariance.
struct Symmetry {
    center: Option<Vec<f64>>,
    /// Radial extent of the restricted support.
    r_lo: f64,
    r_hi: f64,
}

fn symmetry(measure: &MeasureSpec, region: &Region) -> Option<Symmetry> {
    match &measure.kind {
        MeasureKind::Lebesgue { .. } | MeasureKind::Density { .. } => {
            let cfg = radial_config(measure, region)?;
            Some(Symmetry {
                center: cfg.center,
                r_lo: cfg.r_lo,
                r_hi: cfg.r_hi,
            })
        }
        MeasureKind::SphereSurface { center, radius } => {
            if measure.dim == 1 {
                return None;
            }
            sphere_config(measure.dim, center, *radius, region)?;
            Some(Symmetry {
                center: Some(center.clone()),
                r_lo: *radius,
                r_hi: *radius,
            })
        }
        _ => None,
    }
}

fn radial_sup(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    region: &Region,
    search: &SupSearch,
    sym: &Symmetry,
) -> Result<SupResult> {
    let d = measure.dim;
    let at = |dd: f64| -> Vec<f64> {
        let mut x = sym.center.clone().unwrap_or_else(|| vec![0.0; d]);
        x[0] += dd;
        x
    };
    let Some(_) = &sym.center else {
        let x = at(0.0);
        let v = potential(kernel, p, measure, &x, region)?;
        return Ok(SupResult {
            value: v.value,
            argmax: x,
            status: v.status,
            low_confidence: false,
            evaluations: 1,
        });
    };
    let reach = region.within.unwrap_or(0.0);
    let (lo, hi) = if search.frostman && region.within.is_none() {
        let hi = if sym.r_hi.is_finite() {
            sym.r_hi
        } else {
            sym.r_lo + 3.0 * sym.r_lo.max(kernel.length_scale()).max(1.0)
        };
        (sym.r_lo, hi)
    } else {
        let lo = (sym.r_lo - reach).max(0.0);
        let lo = if region.within.is_some() { lo } else { 0.0 };
        let hi = if sym.r_hi.is_finite() {
            sym.r_hi + reach
        } else {
            sym.r_lo + reach + 3.0 * sym.r_lo.max(kernel.length_scale()).max(1.0)
        };
        (lo, hi)
    };
    let n = (2 * search.grid).max(8);
    let mut ds: Vec<f64> = if hi > lo {
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    } else {
        vec![lo]
    };
    for extra in [sym.r_lo, sym.r_hi] {
        if extra.is_finite() && extra >= lo && extra <= hi {
            ds.push(extra);
        }
    }
    ds.sort_by(f64::total_cmp);
    ds.dedup();
    let vals: Vec<Result<Integral>> = ds
        .par_iter()
        .map(|&dd| potential(kernel, p, measure, &at(dd), region))
        .collect();
    let mut best = (f64::NEG_INFINITY, 0usize, QuadStatus::Converged);
    let mut evaluations = ds.len();
    for (i, v) in vals.into_iter().enumerate() {
        let v = v?;
        if v.value > best.0 || (v.value.is_nan() && best.0 == f64::NEG_INFINITY) {
            best = (v.value, i, v.status);
        }
    }
    if best.0.is_infinite() || ds.len() < 3 {
        return Ok(SupResult {
            value: best.0,
            argmax: at(ds[best.1]),
            status: best.2,
            low_confidence: false,
            evaluations,
        });
    }
    // golden-section refinement in the bracketing cell
    let i = best.1;
    let mut a = ds[i.saturating_sub(1)];
    let mut b = ds[(i + 1).min(ds.len() - 1)];
    let mut arg = ds[i];
    let mut val = best.0;
    let mut status = best.2;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |dd: f64| potential(kernel, p, measure, &at(dd), region);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fe = f(e)?;
    evaluations += 2;
    for _ in 0..40 {
        if (b - a) <= 1e-10 * (1.0 + arg.abs()) {
            break;
        }
        if fc.value >= fe.value {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e)?;
        }
        evaluations += 1;
        for (x, v) in [(c, &fc), (e, &fe)] {
            if v.value > val {
                val = v.value;
                arg = x;
                status = v.status;
            }
        }
    }
    Ok(SupResult {
        value: val,
        argmax: at(arg),
        status,
        low_confidence: false,
        evaluations,
    })
}

/// Bounding box of the support of `measure` restricted to `region`.
fn support_box(measure: &MeasureSpec, region: &Region) -> Option<Vec<(f64, f64)>> {
    let d = measure.dim;
    let mut bx = match &measure.kind {
        MeasureKind::Lebesgue { domain } | MeasureKind::Density { domain, .. } => domain.axis_bounds(),
        MeasureKind::SphereSurface { center, radius } => {
            center.iter().map(|c| (c - radius, c + radius)).collect()
        }
        MeasureKind::Atoms { atoms } => {
            let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
            for a in atoms.iter().filter(|a| a.mass > 0.0) {
                for k in 0..d {
                    b[k].0 = b[k].0.min(a.point[k]);
                    b[k].1 = b[k].1.max(a.point[k]);
                }
            }
            b
        }
        MeasureKind::Mixture { components } => {
            let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
            for c in components.iter().filter(|c| c.weight > 0.0 && !c.measure.is_zero()) {
                let cb = support_box(&c.measure, &Region::all())?;
                for k in 0..d {
                    b[k].0 = b[k].0.min(cb[k].0);
                    b[k].1 = b[k].1.max(cb[k].1);
                }
            }
            b
        }
    };
    if let Some(s) = &region.set {
        for (k, (a, b)) in s.axis_bounds().into_iter().enumerate() {
            bx[k].0 = bx[k].0.max(a);
            bx[k].1 = bx[k].1.min(b);
        }
    }
    if bx.iter().all(|(a, b)| a.is_finite() && b.is_finite()) {
        Some(bx)
    } else {
        None
    }
}

fn grid_sup(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    region: &Region,
    search: &SupSearch,
) -> Result<SupResult> {
    let d = measure.dim;
    let mut low_confidence = true;
    let reach = region.within.unwrap_or(0.0);
    let bx = match support_box(measure, region) {
        Some(b) => b
            .into_iter()
            .map(|(a, b)| {
                let pad = reach.max(1e-3 * (b - a).abs()).max(1e-3);
                (a - pad, b + pad)
            })
            .collect::<Vec<_>>(),
        None => vec![(-4.0, 4.0); d],
    };
    let mut cands: Vec<Vec<f64>> = Vec::new();
    if let MeasureKind::Atoms { atoms } = &measure.kind {
        cands.extend(atoms.iter().filter(|a| a.mass > 0.0).map(|a| a.point.clone()));
        low_confidence = false;
    }
    let per_axis = match d {
        1 => search.grid * 4,
        2 => search.grid,
        3 => (search.grid / 2).max(4),
        _ => 4,
    }
    .max(2);
    let total = per_axis.pow(d as u32);
    for idx in 0..total {
        let mut x = vec![0.0; d];
        let mut r = idx;
        for (k, xk) in x.iter_mut().enumerate() {
            let i = r % per_axis;
            r /= per_axis;
            let (a, b) = bx[k];
            *xk = a + (b - a) * (i as f64 + 0.5) / per_axis as f64;
        }
        cands.push(x);
    }
    if search.frostman && region.within.is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
        let env = Domain::cube(
            bx.iter().map(|b| b.0).collect(),
            bx.iter().map(|b| b.1).collect(),
        )?;
        if let Ok(samples) = measure.sample(4 * search.grid, &mut rng, Some(&env)) {
            cands.extend(samples.into_iter().map(|s| s.0));
        }
    }
    let vals: Vec<Result<Integral>> = cands
        .par_iter()
        .map(|x| potential(kernel, p, measure, x, region))
        .collect();
    let mut scored: Vec<(f64, usize, QuadStatus)> = Vec::with_capacity(vals.len());
    for (i, v) in vals.into_iter().enumerate() {
        let v = v?;
        scored.push((v.value, i, v.status));
    }
    let mut evaluations = scored.len();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut best, bi, mut status) = scored[0];
    let mut arg = cands[bi].clone();
    if best.is_infinite() {
        return Ok(SupResult {
            value: best,
            argmax: arg,
            status,
            low_confidence: false,
            evaluations,
        });
    }
    // compass search from the best starts
    let width: f64 = bx.iter().map(|(a, b)| b - a).fold(0.0, f64::max);
    for &(v0, i0, _) in scored.iter().take(search.starts) {
        let mut x = cands[i0].clone();
        let mut v = v0;
        let mut step = width / per_axis as f64;
        while step > 1e-6 * width.max(1e-12) {
            let mut moved = false;
            for k in 0..d {
                for sgn in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[k] += sgn * step;
                    let w = potential(kernel, p, measure, &y, region)?;
                    evaluations += 1;
                    if w.value > v {
                        v = w.value;
                        x = y;
                        moved = true;
                        if w.value > best {
                            best = w.value;
                            arg = x.clone();
                            status = w.status;
                        }
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
            if v.is_infinite() {
                break;
            }
        }
    }
    Ok(SupResult {
        value: best,
        argmax: arg,
        status,
        low_confidence,
        evaluations,
    })
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

/// Default radii `8^{-k}`, `k = 0..=16`.
pub fn default_radii() -> Vec<f64> {
    (0..=16).map(|k| 8f64.powi(-k)).collect()
}

/// Default tail radii `2^k`, `k = 0..=12`.
pub fn default_tail_radii() -> Vec<f64> {
    (0..=12).map(|k| 2f64.powi(k)).collect()
}

fn note_status(notes: &mut Vec<String>, x: f64, s: &SupResult) {
    if s.status == QuadStatus::Inconclusive {
        notes.push(format!("{x}: quadrature inconclusive"));
    }
    if s.low_confidence {
        notes.push(format!("{x}: low-confidence maximisation"));
    }
}

/// `φ(r) = sup_x ∫_{B_r(x)} k^p dμ` on the given radii, limit `r → 0`.
pub fn local_kato_profile(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    radii: &[f64],
    search: &SupSearch,
) -> Result<DecayProfile> {
    check_p(p)?;
    local_profile(kernel, p, measure, radii, search)
}

fn local_profile(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    radii: &[f64],
    search: &SupSearch,
) -> Result<DecayProfile> {
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::param("radii", "must be positive"));
    }
    let mut notes = Vec::new();
    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        let s = sup_potential(kernel, p, measure, &Region::near(r), search)?;
        note_status(&mut notes, r, &s);
        pts.push((r, s.value));
    }
    let mut prof = DecayProfile::from_points(
        format!("local[{}; p={p}]", kernel.label()),
        Limit::Zero,
        pts,
        &DecisionRule::default(),
    );
    prof.notes = notes;
    Ok(prof)
}

/// `T(R) = sup_x ∫_{|y - o| ≥ R} k^p dμ`, limit `R → ∞`.
pub fn tail_profile(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    origin: &[f64],
    radii: &[f64],
    search: &SupSearch,
) -> Result<DecayProfile> {
    check_p(p)?;
    check_dim(measure.dim, origin.len())?;
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::param("radii", "must be positive"));
    }
    let mut notes = Vec::new();
    let mut pts = Vec::with_capacity(radii.len());
    let support = measure.support_radius();
    let o_norm = origin.iter().map(|v| v * v).sum::<f64>().sqrt();
    for &r in radii {
        if support.is_some_and(|s| r > s + o_norm) {
            pts.push((r, 0.0));
            continue;
        }
        let s = sup_potential(kernel, p, measure, &Region::tail(origin.to_vec(), r), search)?;
        note_status(&mut notes, r, &s);
        pts.push((r, s.value));
    }
    let mut prof = DecayProfile::from_points(
        format!("tail[{}; p={p}]", kernel.label()),
        Limit::Infinity,
        pts,
        &DecisionRule::default(),
    );
    if let Some(fit) = prof.fit_semilog() {
        if fit.exponent < 0.0 && prof.values.iter().all(|v| v.is_finite()) {
            notes.push(format!("semilog decay rate {:.6}", -fit.exponent));
        }
    }
    prof.notes.extend(notes);
    Ok(prof)
}

/// Base λ-ladder for the `λ → ∞` limit.
pub const BASE_LADDER: [f64; 5] = [1.0, 4.0, 16.0, 64.0, 256.0];

/// Extensions tried in order when the base ladder is not decisive.
pub fn ladder_extension(spec: &ProcessSpec) -> Vec<f64> {
    let ks: &[i32] = match spec.kind {
        ProcessKind::Relativistic { .. } => &[6, 8, 10, 12],
        _ => &[6, 8, 12, 16, 24, 32, 40],
    };
    ks.iter().map(|&k| 4f64.powi(k)).collect()
}

/// `λ ↦ ‖R_λ^p μ‖_∞` on the ladder, extended until the verdict is decisive.
pub fn kato_ladder_profile(
    spec: &ProcessSpec,
    p: f64,
    measure: &MeasureSpec,
    lambdas: Option<&[f64]>,
    search: &SupSearch,
) -> Result<DecayProfile> {
    check_p(p)?;
    spec.validate()?;
    check_dim(spec.dim, measure.dim)?;
    let rule = DecisionRule::default();
    let mut pts = Vec::new();
    let mut notes = Vec::new();
    let mut eval = |lam: f64, pts: &mut Vec<(f64, f64)>| -> Result<()> {
        let k = RadialKernel::resolvent(*spec, lam)?;
        let s = sup_potential(&k, p, measure, &Region::all(), search)?;
        note_status(&mut notes, lam, &s);
        pts.push((lam, s.value));
        Ok(())
    };
    let label = format!("ladder[{}; p={p}]", spec.label());
    match lambdas {
        Some(ls) => {
            for &l in ls {
                if !(l > 0.0) {
                    return Err(Error::param("lambdas", "must be positive"));
                }
                eval(l, &mut pts)?;
            }
        }
        None => {
            for l in BASE_LADDER {
                eval(l, &mut pts)?;
            }
            for l in ladder_extension(spec) {
                let seq: Vec<f64> = pts.iter().map(|p| p.1).collect();
                if rule.verdict(&seq) != Verdict::Inconclusive {
                    break;
                }
                eval(l, &mut pts)?;
            }
        }
    }
    let mut prof = DecayProfile::from_points(label, Limit::Infinity, pts, &rule);
    prof.notes = notes;
    Ok(prof)
}

// ---------------------------------------------------------------------------
// Chen condition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChenOutcome {
    Holds,
    Violated,
    Inconclusive,
}

/// Worst subset found by the adversary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstSubset {
    pub description: String,
    pub center: Vec<f64>,
    pub mass: f64,
    /// `sup_x ∫_{K^c ∪ B} k^p dν` for this `B`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChenCheck {
    pub outcome: ChenOutcome,
    /// `sup_x ∫_{K^c} k^p dν`.
    pub tail_value: f64,
    pub worst: Option<WorstSubset>,
    pub candidates: usize,
}

/// Adversarial search for `B ⊆ K`, `ν(B) < δ` with
/// `sup_x ∫_{K^c ∪ B} k^p dν ≥ ε`.
///
/// Candidates are ν-mass-δ balls about the five best points of the local
/// potential inside `K` and the densest partition cells of `K` at two
/// scales. `Holds` means no candidate violated the bound.
pub fn chen_condition_check(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    eps: f64,
    compact: &Ball,
    delta: f64,
    search: &SupSearch,
) -> Result<ChenCheck> {
    check_p(p)?;
    check_dim(measure.dim, compact.center.len())?;
    if !(eps > 0.0) || !(delta >= 0.0) || !(compact.radius > 0.0) {
        return Err(Error::param("chen", "need ε > 0, δ ≥ 0 and a ball K of positive radius"));
    }
    let k_dom = Domain::ball(compact.center.clone(), compact.radius)?;
    let mass_k = potential(kernel, 0.0, measure, &compact.center, &Region::in_set(k_dom.clone()))?;
    if !mass_k.value.is_finite() {
        return Err(Error::param("K", "ν(K) must be finite"));
    }
    let tail_region = Region::tail(compact.center.clone(), compact.radius);
    let tail = sup_potential(kernel, p, measure, &tail_region, search)?;
    let mut worst: Option<WorstSubset> = None;
    let mut candidates = 0;
    let consider = |w: WorstSubset, worst: &mut Option<WorstSubset>| {
        if worst.as_ref().is_none_or(|b| w.value > b.value) {
            *worst = Some(w);
        }
    };
    if delta > 0.0 {
        for (center, r) in mass_delta_balls(kernel, p, measure, &k_dom, compact, delta, search)? {
            candidates += 1;
            let region = Region {
                within: Some(r),
                set: Some(k_dom.clone()),
                ..Region::default()
            };
            let inner = potential(kernel, p, measure, &center, &region)?;
            let outer = potential(kernel, p, measure, &center, &tail_region)?;
            let mass = potential(kernel, 0.0, measure, &center, &region)?.value;
            let mut value = inner.value + outer.value;
            // the K^c part may peak elsewhere
            if tail.value > outer.value && measure.dim <= 3 {
                let b_dom = Domain::intersection(vec![Domain::ball(center.clone(), r)?, k_dom.clone()])?;
                let at_tail = potential(kernel, p, measure, &tail.argmax, &Region::in_set(b_dom))?;
                value = value.max(at_tail.value + tail.value);
            }
            consider(
                WorstSubset {
                    description: format!("ball r={r:.6e}"),
                    center,
                    mass,
                    value,
                },
                &mut worst,
            );
        }
        if measure.dim <= 3 {
            for (cell, center, mass) in dense_cells(measure, compact, delta)? {
                candidates += 1;
                let b = Region::in_set(cell);
                let inner = potential(kernel, p, measure, &center, &b)?;
                let outer = potential(kernel, p, measure, &center, &tail_region)?;
                consider(
                    WorstSubset {
                        description: "partition cell".into(),
                        center,
                        mass,
                        value: inner.value + outer.value,
                    },
                    &mut worst,
                );
            }
        }
    }
    let best = worst.as_ref().map_or(tail.value, |w| w.value.max(tail.value));
    let outcome = if best.is_nan() {
        ChenOutcome::Inconclusive
    } else if best >= eps {
        ChenOutcome::Violated
    } else {
        ChenOutcome::Holds
    };
    Ok(ChenCheck {
        outcome,
        tail_value: tail.value,
        worst,
        candidates,
    })
}

/// Largest radius `r ≤ r_max` with `ν(B_r(z) ∩ K) < δ`, by bisection.
fn mass_radius(
    kernel: &RadialKernel,
    measure: &MeasureSpec,
    z: &[f64],
    k_dom: &Domain,
    r_max: f64,
    delta: f64,
) -> Result<Option<f64>> {
    let mass = |r: f64| -> Result<f64> {
        let region = Region {
            within: Some(r),
            set: Some(k_dom.clone()),
            ..Region::default()
        };
        Ok(potential(kernel, 0.0, measure, z, &region)?.value)
    };
    if mass(r_max)? < delta {
        return Ok(Some(r_max));
    }
    let (mut lo, mut hi) = (0.0, r_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mass(mid)? < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if lo > 0.0 { Some(lo) } else { None })
}

fn mass_delta_balls(
    kernel: &RadialKernel,
    p: f64,
    measure: &MeasureSpec,
    k_dom: &Domain,
    compact: &Ball,
    delta: f64,
    search: &SupSearch,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let d = measure.dim;
    let diam = 2.0 * compact.radius;
    // rank candidate centres by the potential of a small ball around them
    let probe = compact.radius * 0.05;
    let mut pts: Vec<Vec<f64>> = vec![compact.center.clone()];
    let local = Region {
        within: Some(probe),
        set: Some(k_dom.clone()),
        ..Region::default()
    };
    if let Ok(s) = sup_potential(kernel, p, measure, &local, search) {
        if k_dom.contains_unchecked(&s.argmax) {
            pts.push(s.argmax);
        }
    }
    if let MeasureKind::Atoms { atoms } = &measure.kind {
        pts.extend(atoms.iter().filter(|a| a.mass > 0.0).map(|a| a.point.clone()));
    }
    let per_axis = match d {
        1 => 16usize,
        2 => 6,
        _ => 4,
    };
    for idx in 0..per_axis.pow(d as u32) {
        let mut x = compact.center.clone();
        let mut r = idx;
        for xk in x.iter_mut() {
            let i = r % per_axis;
            r /= per_axis;
            *xk += compact.radius * (2.0 * (i as f64 + 0.5) / per_axis as f64 - 1.0);
        }
        if k_dom.contains_unchecked(&x) {
            pts.push(x);
        }
    }
    let scores: Vec<f64> = pts
        .par_iter()
        .map(|z| potential(kernel, p, measure, z, &local).map_or(f64::NAN, |v| v.value))
        .collect();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    for &i in order.iter().take(5) {
        if let Some(r) = mass_radius(kernel, measure, &pts[i], k_dom, diam, delta)? {
            out.push((pts[i].clone(), r));
        }
    }
    Ok(out)
}

/// Densest cells of an `n^d` partition of `K`'s bounding box (n = 4, 8)
/// with `ν(cell ∩ K) < δ`.
fn dense_cells(measure: &MeasureSpec, compact: &Ball, delta: f64) -> Result<Vec<(Domain, Vec<f64>, f64)>> {
    let d = measure.dim;
    let k_dom = Domain::ball(compact.center.clone(), compact.radius)?;
    let mut out = Vec::new();
    for n in [4usize, 8] {
        let h = 2.0 * compact.radius / n as f64;
        let mut best: Option<(f64, Domain, Vec<f64>, f64)> = None;
        for idx in 0..n.pow(d as u32) {
            let mut lo = vec![0.0; d];
            let mut r = idx;
            for k in 0..d {
                let i = r % n;
                r /= n;
                lo[k] = compact.center[k] - compact.radius + h * i as f64;
            }
            let hi: Vec<f64> = lo.iter().map(|v| v + h).collect();
            let center: Vec<f64> = lo.iter().map(|v| v + 0.5 * h).collect();
            let cell = Domain::intersection(vec![Domain::cube(lo, hi)?, k_dom.clone()])?;
            let mass = measure.integrate(None, Some(&cell), &[])?.value;
            if !(mass > 0.0 && mass < delta) {
                continue;
            }
            let dens = mass / h.powi(d as i32);
            if best.as_ref().is_none_or(|b| dens > b.0) {
                best = Some((dens, cell, center, mass));
            }
        }
        if let Some((_, cell, center, mass)) = best {
            out.push((cell, center, mass));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Catalogued measure families with closed-form thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureFamily {
    Lebesgue,
    SphereSurface,
}

/// `p* = d/(d-β)₊` (Lebesgue) or `(d-1)/(d-β)₊` (surface), `+∞` when `d ≤ β`.
pub fn analytic_threshold(spec: &ProcessSpec, family: MeasureFamily) -> f64 {
    let d = spec.dim as f64;
    let beta = spec.index();
    if d <= beta {
        return f64::INFINITY;
    }
    match family {
        MeasureFamily::Lebesgue => d / (d - beta),
        MeasureFamily::SphereSurface => (d - 1.0) / (d - beta),
    }
}

/// Family of a measure, when catalogued.
pub fn measure_family(measure: &MeasureSpec) -> Option<MeasureFamily> {
    match &measure.kind {
        MeasureKind::Lebesgue { .. } => Some(MeasureFamily::Lebesgue),
        MeasureKind::Density { density, .. } if density.sup() > 0.0 => Some(MeasureFamily::Lebesgue),
        MeasureKind::SphereSurface { .. } => Some(MeasureFamily::SphereSurface),
        _ => None,
    }
}

/// `M(r) = β r^{β-ν} ∫_0^∞ u^{ν-β-1} Φ₂(u) du`.
pub fn tail_bound_m(r: f64, nu: f64, beta: f64, phi2: &dyn Fn(f64) -> f64) -> Result<f64> {
    if !(r > 0.0) || !(beta > 0.0) {
        return Err(Error::param("r, beta", "must be positive"));
    }
    if nu < beta {
        return Err(Error::param("nu", "need ν ≥ β"));
    }
    let e = nu - beta - 1.0;
    let f = |u: f64| u.powf(e) * phi2(u);
    if e <= -1.0 && phi2(0.0) > 0.0 {
        return Err(Error::Divergent("u^{ν-β-1}Φ₂(u) is not integrable at 0".into()));
    }
    let tol = Tolerance::new(1e-10, 0.0).with_max_subdivisions(2000);
    let head = quad::power_singular_left(f, 0.0, 1.0, e, &[], tol);
    let tail = quad::semi_infinite(f, 1.0, 1.0, &[], tol);
    // moment condition: the tail must settle
    let far = quad::semi_infinite(f, 1e6, 1e6, &[], tol);
    if !tail.converged || !tail.value.is_finite() || far.value.abs() > 1e-6 * (head.value + tail.value).abs() {
        return Err(Error::Divergent("∫ u^{ν-β-1}Φ₂(u) du does not converge at ∞".into()));
    }
    Ok(beta * r.powf(beta - nu) * (head.value + tail.value))
}

/// Options for [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub radii: Vec<f64>,
    pub tail_radii: Vec<f64>,
    /// `None`: base ladder with automatic extension.
    pub lambdas: Option<Vec<f64>>,
    pub origin: Option<Vec<f64>>,
    pub search: SupSearch,
    /// Mass fractions `δ/ν(K)` for the Chen small-set profile.
    pub chen_fractions: Vec<f64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            radii: default_radii(),
            tail_radii: default_tail_radii(),
            lambdas: None,
            origin: None,
            search: SupSearch::default(),
            chen_fractions: (1..=16).map(|k| 8f64.powi(-k)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVerdicts {
    pub s_k: Verdict,
    pub s_ek: Verdict,
    pub s_d: Verdict,
    pub s_d0: Verdict,
    pub k_local: Verdict,
    pub k_tail: Verdict,
    pub zhao: Verdict,
    pub chen: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub measure: MeasureSpec,
    pub process: ProcessSpec,
    pub p: f64,
    pub verdicts: ClassVerdicts,
    pub analytic_threshold: Option<f64>,
    /// Named profiles backing the verdicts.
    pub profiles: Vec<DecayProfile>,
    pub green_sup: Option<f64>,
    pub warnings: Vec<String>,
}

impl ClassVerdicts {
    /// Violations of `S_K ⊆ S_EK ⊆ S_D` and `Chen ⊆ Zhao ⊆ S_K ∩ S_D0`.
    pub fn audit(&self) -> Vec<String> {
        use Verdict::*;
        let mut v = Vec::new();
        let mut sub = |a: Verdict, b: Verdict, an: &str, bn: &str| {
            if a == In && b != In {
                v.push(format!("{an} is IN but {bn} is {b}"));
            }
            if b == Out && a != Out {
                v.push(format!("{bn} is OUT but {an} is {a}"));
            }
        };
        sub(self.s_k, self.s_ek, "S_K", "S_EK");
        sub(self.s_ek, self.s_d, "S_EK", "S_D");
        sub(self.s_k, self.s_d, "S_K", "S_D");
        sub(self.chen, self.zhao, "Chen", "Zhao");
        sub(self.zhao, self.s_k, "Zhao", "S_K");
        sub(self.zhao, self.s_d0, "Zhao", "S_D0");
        v
    }
}

/// Runs the ladder, Green, reference-kernel and Chen profiles and combines
/// them into class verdicts.
pub fn classify(
    spec: &ProcessSpec,
    p: f64,
    measure: &MeasureSpec,
    opts: &ClassifyOptions,
) -> Result<ClassReport> {
    check_p(p)?;
    spec.validate()?;
    check_dim(spec.dim, measure.dim)?;
    measure.validate()?;
    let d = spec.dim;
    let origin = opts.origin.clone().unwrap_or_else(|| default_origin(measure));
    check_dim(d, origin.len())?;
    let search = &opts.search;
    let mut profiles = Vec::new();
    let mut warnings = Vec::new();

    // S_K, S_EK, S_D from the λ-ladder
    let ladder = kato_ladder_profile(spec, p, measure, opts.lambdas.as_deref(), search)?;
    let s_k = ladder.verdict;
    let seq = ladder.sequence();
    let s_d = if seq.iter().any(|v| v.is_finite()) {
        Verdict::In
    } else if seq.iter().all(|v| v.is_infinite()) {
        Verdict::Out
    } else {
        Verdict::Inconclusive
    };
    let s_ek = extended_kato(s_k, s_d, &seq);
    profiles.push(ladder);

    // S_D0 and the Zhao tail from the 0-order kernel
    let (s_d0, green_tail, green_sup) = if measure.is_zero() {
        (Verdict::In, Verdict::In, Some(0.0))
    } else if spec.transient() {
        let g = RadialKernel::green(*spec)?;
        let sup = sup_potential(&g, p, measure, &Region::all(), search)?;
        let s_d0 = if sup.value.is_finite() {
            Verdict::In
        } else if sup.value.is_infinite() {
            Verdict::Out
        } else {
            Verdict::Inconclusive
        };
        let tail = tail_profile(&g, p, measure, &origin, &opts.tail_radii, search)?;
        let tv = tail.verdict;
        profiles.push(tail);
        (s_d0, tv, Some(sup.value))
    } else {
        warnings.push("recurrent process: the 0-order kernel is identically +∞".into());
        (Verdict::Out, Verdict::Out, None)
    };

    // reference-kernel classes
    let (nu, beta) = spec.reference_exponents();
    let reference = RadialKernel::new(KernelSpec::Reference { dim: d, nu, beta })?;
    let k_local = if nu < beta {
        // reduces to bounded unit-ball masses
        let s = sup_potential(&reference, 0.0, measure, &Region::near(1.0), search)?;
        if s.value.is_finite() {
            Verdict::In
        } else {
            Verdict::Out
        }
    } else {
        let prof = local_profile(&reference, p, measure, &opts.radii, search)?;
        let v = prof.verdict;
        profiles.push(prof);
        v
    };
    // the Green-tight class is only defined for ν > β
    let k_tail = if nu > beta {
        let ref_tail = tail_profile(&reference, p, measure, &origin, &opts.tail_radii, search)?;
        let v = ref_tail.verdict;
        profiles.push(ref_tail);
        v
    } else {
        warnings.push(format!("K^(p,∞) needs ν > β (here ν = {nu}, β = {beta})"));
        Verdict::Out
    };

    let zhao = s_d0.and(s_k).and(green_tail);
    let chen = if zhao == Verdict::In {
        let prof = chen_profile(spec, p, measure, &origin, opts)?;
        let v = prof.verdict;
        profiles.push(prof);
        zhao.and(v)
    } else {
        zhao
    };
    let verdicts = ClassVerdicts {
        s_k,
        s_ek,
        s_d,
        s_d0,
        k_local,
        k_tail,
        zhao,
        chen,
    };
    for v in verdicts.audit() {
        warnings.push(format!("implication violated: {v}"));
    }
    Ok(ClassReport {
        measure: measure.clone(),
        process: *spec,
        p,
        verdicts,
        analytic_threshold: measure_family(measure).map(|f| analytic_threshold(spec, f)),
        profiles,
        green_sup,
        warnings,
    })
}

fn default_origin(measure: &MeasureSpec) -> Vec<f64> {
    let d = measure.dim;
    match &measure.kind {
        MeasureKind::Lebesgue { domain } | MeasureKind::Density { domain, .. } => match &domain.kind {
            DomainKind::Ball { center, .. } | DomainKind::Exterior { center, .. } => center.clone(),
            _ => match &measure.kind {
                MeasureKind::Density { density, .. } => {
                    density.center().map_or(vec![0.0; d], |c| c.to_vec())
                }
                _ => vec![0.0; d],
            },
        },
        MeasureKind::SphereSurface { center, .. } => center.clone(),
        _ => vec![0.0; d],
    }
}

fn extended_kato(s_k: Verdict, s_d: Verdict, seq: &[f64]) -> Verdict {
    if s_k == Verdict::In {
        return Verdict::In;
    }
    if s_d == Verdict::Out {
        return Verdict::Out;
    }
    let fin: Vec<f64> = seq.iter().copied().filter(|v| v.is_finite()).collect();
    let n = fin.len();
    if n < 3 || fin.len() != seq.len() {
        return Verdict::Inconclusive;
    }
    let tail = &fin[n - 3..];
    let nonincreasing = tail.windows(2).all(|w| w[1] <= w[0]);
    if nonincreasing && tail[2] < 1.0 {
        Verdict::In
    } else if s_k == Verdict::Out && tail.iter().all(|&v| v >= 1.0) {
        Verdict::Out
    } else {
        Verdict::Inconclusive
    }
}

/// `δ ↦ sup_{B ⊆ K, ν(B) < δ} sup_x ∫_B R^p dν` on `δ = ν(K)·fractions`.
fn chen_profile(
    spec: &ProcessSpec,
    p: f64,
    measure: &MeasureSpec,
    origin: &[f64],
    opts: &ClassifyOptions,
) -> Result<DecayProfile> {
    let g = RadialKernel::green(*spec)?;
    let o_norm = origin.iter().map(|v| v * v).sum::<f64>().sqrt();
    let radius = measure
        .support_radius()
        .map(|r| r + o_norm)
        .unwrap_or(4.0 * g.length_scale().max(1.0))
        .max(1e-6);
    let compact = Ball {
        center: origin.to_vec(),
        radius,
    };
    let k_dom = Domain::ball(origin.to_vec(), radius)?;
    let mass_k = potential(&g, 0.0, measure, origin, &Region::in_set(k_dom.clone()))?.value;
    let mut pts = Vec::new();
    for &f in &opts.chen_fractions {
        let delta = f * mass_k;
        let mut worst: f64 = 0.0;
        for (z, r) in mass_delta_balls(&g, p, measure, &k_dom, &compact, delta, &opts.search)? {
            let region = Region {
                within: Some(r),
                set: Some(k_dom.clone()),
                ..Region::default()
            };
            worst = worst.max(potential(&g, p, measure, &z, &region)?.value);
        }
        pts.push((delta, worst));
    }
    Ok(DecayProfile::from_points(
        format!("chen-small-sets[{}; p={p}]", g.label()),
        Limit::Zero,
        pts,
        &DecisionRule::default(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ref3() -> RadialKernel {
        RadialKernel::reference(3, 2.0)
    }

    #[test]
    fn polar_oracle_ball() {
        let mu = MeasureSpec::lebesgue(Domain::unit_ball(3));
        let v = p_potential(&ref3(), 1.0, &mu, &[0.0; 3], &Region::all()).unwrap();
        assert!((v.value - 2.0 * PI).abs() < 1e-8, "{}", v.value);
        let v = p_potential(&ref3(), 3.0, &mu, &[0.0; 3], &Region::all()).unwrap();
        assert!(v.value.is_infinite());
    }

    #[test]
    fn off_centre_matches_generic_route() {
        let mu = MeasureSpec::lebesgue(Domain::unit_ball(3));
        let x = [0.3, 0.1, -0.2];
        let exact = p_potential(&ref3(), 1.5, &mu, &x, &Region::near(0.6)).unwrap();
        let generic = generic_potential(&ref3(), 1.5, &mu, &x, &Region::near(0.6)).unwrap();
        assert!((exact.value / generic.value - 1.0).abs() < 1e-4, "{} {}", exact.value, generic.value);
    }

    #[test]
    fn atom_evaluation() {
        let mu = MeasureSpec::atoms(2, vec![(vec![1.0, 0.0], 2.5)]).unwrap();
        let k = RadialKernel::reference(2, 1.0);
        let v = p_potential(&k, 2.0, &mu, &[0.0, 0.0], &Region::all()).unwrap();
        assert!((v.value - 2.5).abs() < 1e-15);
        let s = sup_p_potential(&k, 1.0, &mu, &Region::all(), &SupSearch::default()).unwrap();
        assert!(s.value.is_infinite());
    }

    #[test]
    fn sphere_potential_is_4pi_on_the_sphere() {
        let mu = MeasureSpec::sphere(vec![0.0; 3], 1.0).unwrap();
        let v = p_potential(&ref3(), 1.0, &mu, &[0.0, 0.0, 1.0], &Region::all()).unwrap();
        assert!((v.value - 4.0 * PI).abs() < 1e-7, "{}", v.value);
        let s = sup_p_potential(&ref3(), 1.0, &mu, &Region::all(), &SupSearch::default()).unwrap();
        assert!((s.value - 4.0 * PI).abs() < 1e-6);
        let v = p_potential(&ref3(), 2.0, &mu, &[0.0, 0.0, 1.0], &Region::all()).unwrap();
        assert!(v.value.is_infinite());
    }

    #[test]
    fn thresholds() {
        let b3 = ProcessSpec::brownian(3);
        assert_eq!(analytic_threshold(&b3, MeasureFamily::Lebesgue), 3.0);
        assert_eq!(analytic_threshold(&b3, MeasureFamily::SphereSurface), 2.0);
        let s = ProcessSpec::stable(1, 1.5).unwrap();
        assert!(analytic_threshold(&s, MeasureFamily::Lebesgue).is_infinite());
    }

    #[test]
    fn tail_bound_examples() {
        let m = tail_bound_m(0.5, 3.0, 2.0, &|u: f64| (-u).exp()).unwrap();
        assert!((m - 4.0).abs() < 1e-8);
        let m2 = tail_bound_m(1.0, 3.0, 2.0, &|u: f64| (-u).exp()).unwrap();
        assert!((m / m2 - 2.0).abs() < 1e-10);
        assert!(tail_bound_m(1.0, 2.0, 2.0, &|u: f64| (-u).exp()).is_err());
    }
}
