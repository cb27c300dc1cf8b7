//! Domains of ℝ^d, positive measures on them, and the integration,
//! sampling and unit-ball decay machinery built on top.
//!
//! Domains are open sets (boundary excluded), except [`DomainKind::Exterior`]
//! which is the closed complement of a ball and is used for tail regions
//! `{ |y - o| ≥ R }`.
//!
//! Integration without declared singularities is iterated: axis 0 is handled
//! exactly by intersecting lines with the domain (chords), the remaining axes
//! by nested adaptive quadrature. With a declared singular point the integral
//! is taken in polar coordinates centred there.

use crate::error::{check_dim, Error, Result};
use crate::profile::{DecayProfile, DecisionRule, Limit, Verdict};
use crate::quad::{self, QuadResult, Tolerance};
use crate::special::{shell_fraction_in_ball, sphere_area};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// Interval sets
// ---------------------------------------------------------------------------

/// Finite union of disjoint open intervals, sorted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet(pub Vec<(f64, f64)>);

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet(Vec::new())
    }

    pub fn full() -> Self {
        IntervalSet(vec![(f64::NEG_INFINITY, f64::INFINITY)])
    }

    pub fn single(a: f64, b: f64) -> Self {
        if b > a {
            IntervalSet(vec![(a, b)])
        } else {
            IntervalSet::empty()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn normalize(mut v: Vec<(f64, f64)>) -> Self {
        v.retain(|(a, b)| b > a);
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            if let Some(last) = out.last_mut() {
                if a <= last.1 {
                    last.1 = last.1.max(b);
                    continue;
                }
            }
            out.push((a, b));
        }
        IntervalSet(out)
    }

    pub fn union(&self, o: &IntervalSet) -> IntervalSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&o.0);
        IntervalSet::normalize(v)
    }

    pub fn intersect(&self, o: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for &(a, b) in &self.0 {
            for &(c, e) in &o.0 {
                let lo = a.max(c);
                let hi = b.min(e);
                if hi > lo {
                    out.push((lo, hi));
                }
            }
        }
        IntervalSet::normalize(out)
    }

    pub fn complement(&self) -> IntervalSet {
        let mut out = Vec::new();
        let mut cur = f64::NEG_INFINITY;
        for &(a, b) in &self.0 {
            if a > cur {
                out.push((cur, a));
            }
            cur = b;
        }
        if cur < f64::INFINITY {
            out.push((cur, f64::INFINITY));
        }
        IntervalSet::normalize(out)
    }

    pub fn clip(&self, lo: f64, hi: f64) -> IntervalSet {
        self.intersect(&IntervalSet::single(lo, hi))
    }

    pub fn length(&self) -> f64 {
        self.0.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.0.iter().any(|&(a, b)| t > a && t < b)
    }
}

// ---------------------------------------------------------------------------
// Domains
// ---------------------------------------------------------------------------

/// Cross-section half-width of a horn as a function of the first coordinate.
/// Both profiles are strictly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HornProfile {
    /// `scale · exp(-rate · x1)`
    Exp { scale: f64, rate: f64 },
    /// `scale · x1^(-exponent)` for `x1 > 0`
    Power { scale: f64, exponent: f64 },
}

impl HornProfile {
    pub fn width(&self, x1: f64) -> f64 {
        match *self {
            HornProfile::Exp { scale, rate } => scale * (-rate * x1).exp(),
            HornProfile::Power { scale, exponent } => {
                if x1 <= 0.0 {
                    f64::INFINITY
                } else {
                    scale * x1.powf(-exponent)
                }
            }
        }
    }

    /// Largest `x1` with `width(x1) > w`.
    fn inverse(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return f64::INFINITY;
        }
        match *self {
            HornProfile::Exp { scale, rate } => (scale / w).ln() / rate,
            HornProfile::Power { scale, exponent } => (scale / w).powf(1.0 / exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    FullSpace,
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// `{ |x_axis| < width/2 }`, axis is 0-based.
    Strip {
        axis: usize,
        width: f64,
    },
    /// `{ x_1 > start, |x'| < profile(x_1) }` with `x' = (x_2, …, x_d)`.
    Horn {
        profile: HornProfile,
        start: f64,
    },
    /// Closed exterior `{ |x - center| ≥ radius }`.
    Exterior {
        center: Vec<f64>,
        radius: f64,
    },
    Union {
        parts: Vec<Domain>,
    },
    Intersection {
        parts: Vec<Domain>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: DomainKind,
    /// Whether every boundary point is treated as regular.
    #[serde(default = "default_true")]
    pub regular_hint: bool,
}

fn default_true() -> bool {
    true
}

impl Domain {
    pub fn new(dim: usize, kind: DomainKind) -> Result<Self> {
        let d = Domain {
            dim,
            kind,
            regular_hint: true,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn full(dim: usize) -> Self {
        Domain {
            dim,
            kind: DomainKind::FullSpace,
            regular_hint: true,
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Domain::new(center.len(), DomainKind::Ball { center, radius })
    }

    pub fn unit_ball(dim: usize) -> Self {
        Domain::ball(vec![0.0; dim], 1.0).expect("valid")
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Domain::new(1, DomainKind::Box { lo: vec![a], hi: vec![b] })
    }

    pub fn cube(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Domain::new(lo.len(), DomainKind::Box { lo, hi })
    }

    pub fn strip(dim: usize, axis: usize, width: f64) -> Result<Self> {
        Domain::new(dim, DomainKind::Strip { axis, width })
    }

    pub fn horn(dim: usize, profile: HornProfile, start: f64) -> Result<Self> {
        Domain::new(dim, DomainKind::Horn { profile, start })
    }

    pub fn exterior(center: Vec<f64>, radius: f64) -> Result<Self> {
        Domain::new(center.len(), DomainKind::Exterior { center, radius })
    }

    pub fn union(parts: Vec<Domain>) -> Result<Self> {
        let dim = parts.first().map(|p| p.dim).unwrap_or(1);
        Domain::new(dim, DomainKind::Union { parts })
    }

    pub fn intersection(parts: Vec<Domain>) -> Result<Self> {
        let dim = parts.first().map(|p| p.dim).unwrap_or(1);
        Domain::new(dim, DomainKind::Intersection { parts })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("dim", "dimension must be ≥ 1"));
        }
        match &self.kind {
            DomainKind::FullSpace => {}
            DomainKind::Ball { center, radius } | DomainKind::Exterior { center, radius } => {
                check_dim(self.dim, center.len())?;
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::param("radius", "must be positive and finite"));
                }
            }
            DomainKind::Box { lo, hi } => {
                check_dim(self.dim, lo.len())?;
                check_dim(self.dim, hi.len())?;
                if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return Err(Error::param("box", "need lo < hi on every axis"));
                }
            }
            DomainKind::Strip { axis, width } => {
                if *axis >= self.dim {
                    return Err(Error::param("axis", "strip axis out of range"));
                }
                if !(*width > 0.0) {
                    return Err(Error::param("width", "must be positive"));
                }
            }
            DomainKind::Horn { profile, start } => {
                if self.dim < 2 {
                    return Err(Error::param("dim", "horn needs d ≥ 2"));
                }
                match *profile {
                    HornProfile::Exp { scale, rate } => {
                        if !(scale > 0.0 && rate > 0.0) {
                            return Err(Error::param("profile", "scale and rate must be positive"));
                        }
                    }
                    HornProfile::Power { scale, exponent } => {
                        if !(scale > 0.0 && exponent > 0.0 && *start > 0.0) {
                            return Err(Error::param(
                                "profile",
                                "power horn needs positive scale, exponent and start",
                            ));
                        }
                    }
                }
            }
            DomainKind::Union { parts } | DomainKind::Intersection { parts } => {
                if parts.is_empty() {
                    return Err(Error::param("parts", "need at least one sub-domain"));
                }
                for p in parts {
                    check_dim(self.dim, p.dim)?;
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Membership with the open-set convention.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim, x.len())?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        match &self.kind {
            DomainKind::FullSpace => x.iter().all(|v| v.is_finite()),
            DomainKind::Ball { center, radius } => dist2(x, center) < radius * radius,
            DomainKind::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| v > a && v < b),
            DomainKind::Strip { axis, width } => x[*axis].abs() < 0.5 * width,
            DomainKind::Horn { profile, start } => {
                let x1 = x[0];
                if !(x1 > *start) {
                    return false;
                }
                let r2: f64 = x[1..].iter().map(|v| v * v).sum();
                r2.sqrt() < profile.width(x1)
            }
            DomainKind::Exterior { center, radius } => dist2(x, center) >= radius * radius,
            DomainKind::Union { parts } => parts.iter().any(|p| p.contains_unchecked(x)),
            DomainKind::Intersection { parts } => parts.iter().all(|p| p.contains_unchecked(x)),
        }
    }

    /// Circumradius about the origin for bounded domains.
    pub fn circumradius(&self) -> Option<f64> {
        match &self.kind {
            DomainKind::FullSpace
            | DomainKind::Strip { .. }
            | DomainKind::Horn { .. }
            | DomainKind::Exterior { .. } => None,
            DomainKind::Ball { center, radius } => Some(norm(center) + radius),
            DomainKind::Box { lo, hi } => Some(
                lo.iter()
                    .zip(hi)
                    .map(|(a, b)| a.abs().max(b.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            ),
            DomainKind::Union { parts } => {
                let mut m: f64 = 0.0;
                for p in parts {
                    m = m.max(p.circumradius()?);
                }
                Some(m)
            }
            DomainKind::Intersection { parts } => parts
                .iter()
                .filter_map(|p| p.circumradius())
                .reduce(f64::min),
        }
    }

    pub fn bounded(&self) -> bool {
        self.circumradius().is_some()
    }

    /// Per-axis enclosing range (infinite where unbounded).
    pub fn axis_bounds(&self) -> Vec<(f64, f64)> {
        let inf = (f64::NEG_INFINITY, f64::INFINITY);
        match &self.kind {
            DomainKind::FullSpace | DomainKind::Exterior { .. } => vec![inf; self.dim],
            DomainKind::Ball { center, radius } => {
                center.iter().map(|c| (c - radius, c + radius)).collect()
            }
            DomainKind::Box { lo, hi } => lo.iter().copied().zip(hi.iter().copied()).collect(),
            DomainKind::Strip { axis, width } => {
                let mut v = vec![inf; self.dim];
                v[*axis] = (-0.5 * width, 0.5 * width);
                v
            }
            DomainKind::Horn { profile, start } => {
                let w = profile.width(*start);
                let mut v = vec![(-w, w); self.dim];
                v[0] = (*start, f64::INFINITY);
                v
            }
            DomainKind::Union { parts } => {
                let mut v = parts[0].axis_bounds();
                for p in &parts[1..] {
                    for (a, b) in v.iter_mut().zip(p.axis_bounds()) {
                        a.0 = a.0.min(b.0);
                        a.1 = a.1.max(b.1);
                    }
                }
                v
            }
            DomainKind::Intersection { parts } => {
                let mut v = parts[0].axis_bounds();
                for p in &parts[1..] {
                    for (a, b) in v.iter_mut().zip(p.axis_bounds()) {
                        a.0 = a.0.max(b.0);
                        a.1 = a.1.min(b.1);
                    }
                }
                // a horn cut off at x1 ≥ a is no wider than its profile at a
                for p in parts {
                    if let DomainKind::Horn { profile, start } = &p.kind {
                        let w = profile.width(start.max(v[0].0));
                        for b in v.iter_mut().skip(1) {
                            b.0 = b.0.max(-w);
                            b.1 = b.1.min(w);
                        }
                    }
                }
                v
            }
        }
    }

    /// Coordinates along `axis` where chords may appear, vanish or kink.
    pub fn breakpoints(&self, axis: usize) -> Vec<f64> {
        match &self.kind {
            DomainKind::FullSpace => vec![],
            DomainKind::Ball { center, radius } | DomainKind::Exterior { center, radius } => {
                vec![center[axis] - radius, center[axis], center[axis] + radius]
            }
            DomainKind::Box { lo, hi } => vec![lo[axis], hi[axis]],
            DomainKind::Strip { axis: a, width } => {
                if *a == axis {
                    vec![-0.5 * width, 0.5 * width]
                } else {
                    vec![]
                }
            }
            DomainKind::Horn { profile, start } => {
                if axis == 0 {
                    vec![*start]
                } else {
                    let w = profile.width(*start);
                    vec![-w, 0.0, w]
                }
            }
            DomainKind::Union { parts } | DomainKind::Intersection { parts } => {
                parts.iter().flat_map(|p| p.breakpoints(axis)).collect()
            }
        }
    }

    /// Set of `t` with `origin + t·dir ∈ D`; `dir` must be a unit vector.
    pub fn ray_intervals(&self, origin: &[f64], dir: &[f64]) -> IntervalSet {
        match &self.kind {
            DomainKind::FullSpace => IntervalSet::full(),
            DomainKind::Ball { center, radius } => ball_chord(origin, dir, center, *radius),
            DomainKind::Exterior { center, radius } => {
                ball_chord(origin, dir, center, *radius).complement()
            }
            DomainKind::Box { lo, hi } => {
                let mut lo_t = f64::NEG_INFINITY;
                let mut hi_t = f64::INFINITY;
                for k in 0..self.dim {
                    if let Some((a, b)) = slab(origin[k], dir[k], lo[k], hi[k]) {
                        lo_t = lo_t.max(a);
                        hi_t = hi_t.min(b);
                    } else {
                        return IntervalSet::empty();
                    }
                }
                IntervalSet::single(lo_t, hi_t)
            }
            DomainKind::Strip { axis, width } => {
                match slab(origin[*axis], dir[*axis], -0.5 * width, 0.5 * width) {
                    Some((a, b)) => IntervalSet::single(a, b),
                    None => IntervalSet::empty(),
                }
            }
            DomainKind::Horn { profile, start } => horn_ray(profile, *start, origin, dir),
            DomainKind::Union { parts } => parts
                .iter()
                .fold(IntervalSet::empty(), |acc, p| acc.union(&p.ray_intervals(origin, dir))),
            DomainKind::Intersection { parts } => parts.iter().fold(IntervalSet::full(), |acc, p| {
                acc.intersect(&p.ray_intervals(origin, dir))
            }),
        }
    }

    /// Chord of D along coordinate `axis` through `base` (the `axis` entry of
    /// `base` is ignored); parametrized by the coordinate value itself.
    pub fn line_intervals(&self, base: &[f64], axis: usize) -> IntervalSet {
        let mut o = base.to_vec();
        o[axis] = 0.0;
        let mut e = vec![0.0; self.dim];
        e[axis] = 1.0;
        self.ray_intervals(&o, &e)
    }

    /// Distance from an interior point to the boundary along `±e_axis`.
    pub fn boundary_distance_along(&self, x: &[f64], axis: usize, positive: bool) -> f64 {
        let chord = self.line_intervals(x, axis);
        let t = x[axis];
        for &(a, b) in &chord.0 {
            if t > a && t < b {
                return if positive { b - t } else { t - a };
            }
        }
        0.0
    }
}

fn slab(o: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if d == 0.0 {
        if o > lo && o < hi {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    } else {
        let a = (lo - o) / d;
        let b = (hi - o) / d;
        Some((a.min(b), a.max(b)))
    }
}

fn ball_chord(origin: &[f64], dir: &[f64], center: &[f64], radius: f64) -> IntervalSet {
    // |o + t e - c|^2 = t^2 + 2 t e·(o-c) + |o-c|^2
    let oc: Vec<f64> = origin.iter().zip(center).map(|(o, c)| o - c).collect();
    let b: f64 = dir.iter().zip(&oc).map(|(e, v)| e * v).sum();
    let c = oc.iter().map(|v| v * v).sum::<f64>() - radius * radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return IntervalSet::empty();
    }
    let s = disc.sqrt();
    IntervalSet::single(-b - s, -b + s)
}

fn horn_ray(profile: &HornProfile, start: f64, origin: &[f64], dir: &[f64]) -> IntervalSet {
    let perp2_dir: f64 = dir[1..].iter().map(|v| v * v).sum();
    if perp2_dir == 0.0 {
        // along the horn axis
        let rho = origin[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let end = profile.inverse(rho);
        let (lo, hi) = if dir[0] > 0.0 {
            (start - origin[0], end - origin[0])
        } else {
            (origin[0] - end, origin[0] - start)
        };
        return IntervalSet::single(lo, hi);
    }
    if dir[0] == 0.0 {
        let x1 = origin[0];
        if !(x1 > start) {
            return IntervalSet::empty();
        }
        let w = profile.width(x1);
        // |o' + t e'|^2 < w^2 with |e'| = 1
        let b: f64 = origin[1..].iter().zip(&dir[1..]).map(|(o, e)| o * e).sum();
        let c: f64 = origin[1..].iter().map(|v| v * v).sum::<f64>() - w * w;
        let disc = b * b - c;
        if disc <= 0.0 {
            return IntervalSet::empty();
        }
        let s = disc.sqrt();
        return IntervalSet::single(-b - s, -b + s);
    }
    // Oblique ray: bracket sign changes of w(x1(t)) - |x'(t)| numerically.
    // |x'(t)| < w(start) bounds the search window.
    let wmax = profile.width(start);
    let b: f64 = origin[1..].iter().zip(&dir[1..]).map(|(o, e)| o * e).sum();
    let c: f64 = origin[1..].iter().map(|v| v * v).sum::<f64>() - wmax * wmax;
    let disc = b * b - c * perp2_dir;
    if disc <= 0.0 {
        return IntervalSet::empty();
    }
    let s = disc.sqrt();
    let (t0, t1) = ((-b - s) / perp2_dir, (-b + s) / perp2_dir);
    let g = |t: f64| {
        let x1 = origin[0] + t * dir[0];
        if x1 <= start {
            return -1.0;
        }
        let r = origin[1..]
            .iter()
            .zip(&dir[1..])
            .map(|(o, e)| (o + t * e).powi(2))
            .sum::<f64>()
            .sqrt();
        profile.width(x1) - r
    };
    let n = 400;
    let mut out = Vec::new();
    let mut prev_t = t0;
    let mut prev_g = g(t0);
    let mut open: Option<f64> = if prev_g > 0.0 { Some(t0) } else { None };
    for i in 1..=n {
        let t = t0 + (t1 - t0) * i as f64 / n as f64;
        let gt = g(t);
        if (gt > 0.0) != (prev_g > 0.0) {
            let root = bisect(&g, prev_t, t);
            if gt > 0.0 {
                open = Some(root);
            } else if let Some(a) = open.take() {
                out.push((a, root));
            }
        }
        prev_t = t;
        prev_g = gt;
    }
    if let Some(a) = open {
        out.push((a, t1));
    }
    IntervalSet::normalize(out)
}

fn bisect<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64) -> f64 {
    let ga = g(a) > 0.0;
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if (g(m) > 0.0) == ga {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Measures
// ---------------------------------------------------------------------------

/// Nonnegative densities with respect to Lebesgue measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DensityFn {
    Constant {
        value: f64,
    },
    /// `amplitude · exp(-rate |y - center|)`
    Exponential {
        center: Vec<f64>,
        rate: f64,
        amplitude: f64,
    },
    /// `amplitude · exp(-|y - center|² / (2 width²))`
    Gaussian {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
    },
    /// `amplitude · (1 + |y - center|)^(-exponent)`
    PowerTail {
        center: Vec<f64>,
        exponent: f64,
        amplitude: f64,
    },
}

impl DensityFn {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            DensityFn::Constant { value } => *value,
            _ => {
                let c = self.center().expect("radial");
                self.radial(dist2(y, c).sqrt())
            }
        }
    }

    /// Value as a function of the distance to [`Self::center`].
    pub fn radial(&self, rho: f64) -> f64 {
        match *self {
            DensityFn::Constant { value } => value,
            DensityFn::Exponential { rate, amplitude, .. } => amplitude * (-rate * rho).exp(),
            DensityFn::Gaussian {
                width, amplitude, ..
            } => amplitude * (-rho * rho / (2.0 * width * width)).exp(),
            DensityFn::PowerTail {
                exponent,
                amplitude,
                ..
            } => amplitude * (1.0 + rho).powf(-exponent),
        }
    }

    pub fn center(&self) -> Option<&[f64]> {
        match self {
            DensityFn::Constant { .. } => None,
            DensityFn::Exponential { center, .. }
            | DensityFn::Gaussian { center, .. }
            | DensityFn::PowerTail { center, .. } => Some(center),
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            DensityFn::Constant { value } => value,
            DensityFn::Exponential { amplitude, .. }
            | DensityFn::Gaussian { amplitude, .. }
            | DensityFn::PowerTail { amplitude, .. } => amplitude,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let Some(c) = self.center() {
            check_dim(dim, c.len())?;
        }
        let ok = match *self {
            DensityFn::Constant { value } => value >= 0.0,
            DensityFn::Exponential {
                rate, amplitude, ..
            } => rate >= 0.0 && amplitude >= 0.0,
            DensityFn::Gaussian {
                width, amplitude, ..
            } => width > 0.0 && amplitude >= 0.0,
            DensityFn::PowerTail {
                exponent,
                amplitude,
                ..
            } => exponent >= 0.0 && amplitude >= 0.0,
        };
        if !ok {
            return Err(Error::param("density", "parameters must make g ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMeasure {
    pub weight: f64,
    pub measure: MeasureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureKind {
    Lebesgue { domain: Domain },
    Density { domain: Domain, density: DensityFn },
    SphereSurface { center: Vec<f64>, radius: f64 },
    Atoms { atoms: Vec<Atom> },
    Mixture { components: Vec<WeightedMeasure> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: MeasureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_mass_hint: Option<f64>,
}

/// Local behaviour of an integrand at a declared point: `|y - x|^(-γ)` or
/// `log(1/|y - x|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SingularOrder {
    Bounded,
    Log,
    Power { gamma: f64 },
}

impl SingularOrder {
    /// Order of `k^p` given the order of `k`.
    pub fn pow(self, p: f64) -> SingularOrder {
        match self {
            SingularOrder::Power { gamma } => SingularOrder::Power { gamma: gamma * p },
            o => o,
        }
    }

    /// Whether `∫_{|y|<1} k(y) |y|^{dim-1} d|y|` diverges.
    pub fn diverges_in(self, dim: f64) -> bool {
        match self {
            SingularOrder::Power { gamma } => gamma >= dim,
            _ => false,
        }
    }

    pub fn gamma(self) -> f64 {
        match self {
            SingularOrder::Power { gamma } => gamma,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Singularity {
    pub point: Vec<f64>,
    pub order: SingularOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadStatus {
    Converged,
    Inconclusive,
    Infinite,
}

/// Result of a measure integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub status: QuadStatus,
}

impl Integral {
    pub fn infinite() -> Self {
        Integral {
            value: f64::INFINITY,
            error: 0.0,
            status: QuadStatus::Infinite,
        }
    }

    fn from_quad(q: QuadResult) -> Self {
        let status = if q.value.is_infinite() {
            QuadStatus::Infinite
        } else if q.converged {
            QuadStatus::Converged
        } else {
            QuadStatus::Inconclusive
        };
        Integral {
            value: q.value,
            error: q.error,
            status,
        }
    }

    fn add(self, o: Integral, w: f64) -> Integral {
        let status = match (self.status, o.status) {
            (QuadStatus::Infinite, _) | (_, QuadStatus::Infinite) => QuadStatus::Infinite,
            (QuadStatus::Inconclusive, _) | (_, QuadStatus::Inconclusive) => {
                QuadStatus::Inconclusive
            }
            _ => QuadStatus::Converged,
        };
        let value = if w == 0.0 { self.value } else { self.value + w * o.value };
        Integral {
            value,
            error: self.error + w.abs() * o.error,
            status: if value.is_infinite() {
                QuadStatus::Infinite
            } else {
                status
            },
        }
    }
}

pub(crate) const MEASURE_TOL: Tolerance = Tolerance {
    rel: 1e-6,
    abs: 1e-12,
    max_subdivisions: 400,
};

/// `∫_lo^hi` with infinite endpoints allowed.
pub(crate) fn quad_range<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> QuadResult {
    if !(hi > lo) {
        return QuadResult::zero();
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => quad::adaptive_with_breaks(f, lo, hi, breaks, tol),
        (true, false) => quad::semi_infinite(f, lo, 1.0, breaks, tol),
        (false, true) => {
            let mb: Vec<f64> = breaks.iter().map(|b| -b).collect();
            quad::semi_infinite(|t| f(-t), -hi, 1.0, &mb, tol)
        }
        (false, false) => {
            let mb: Vec<f64> = breaks.iter().map(|b| -b).collect();
            let l = quad::semi_infinite(|t| f(-t), 0.0, 1.0, &mb, tol);
            let r = quad::semi_infinite(&mut f, 0.0, 1.0, breaks, tol);
            l + r
        }
    }
}

impl MeasureSpec {
    pub fn new(dim: usize, kind: MeasureKind) -> Result<Self> {
        let m = MeasureSpec {
            dim,
            kind,
            total_mass_hint: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn lebesgue(domain: Domain) -> Self {
        MeasureSpec {
            dim: domain.dim,
            kind: MeasureKind::Lebesgue { domain },
            total_mass_hint: None,
        }
    }

    pub fn density(domain: Domain, density: DensityFn) -> Result<Self> {
        MeasureSpec::new(domain.dim, MeasureKind::Density { domain, density })
    }

    pub fn sphere(center: Vec<f64>, radius: f64) -> Result<Self> {
        MeasureSpec::new(center.len(), MeasureKind::SphereSurface { center, radius })
    }

    pub fn atoms(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        MeasureSpec::new(
            dim,
            MeasureKind::Atoms {
                atoms: atoms
                    .into_iter()
                    .map(|(point, mass)| Atom { point, mass })
                    .collect(),
            },
        )
    }

    pub fn mixture(dim: usize, parts: Vec<(f64, MeasureSpec)>) -> Result<Self> {
        MeasureSpec::new(
            dim,
            MeasureKind::Mixture {
                components: parts
                    .into_iter()
                    .map(|(weight, measure)| WeightedMeasure { weight, measure })
                    .collect(),
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            MeasureKind::Lebesgue { domain } => {
                check_dim(self.dim, domain.dim)?;
                domain.validate()
            }
            MeasureKind::Density { domain, density } => {
                check_dim(self.dim, domain.dim)?;
                domain.validate()?;
                density.validate(self.dim)
            }
            MeasureKind::SphereSurface { center, radius } => {
                check_dim(self.dim, center.len())?;
                if !(*radius > 0.0) {
                    return Err(Error::param("radius", "must be positive"));
                }
                if !(2..=3).contains(&self.dim) {
                    return Err(Error::param("dim", "sphere surface measure needs d ∈ {2, 3}"));
                }
                Ok(())
            }
            MeasureKind::Atoms { atoms } => {
                for a in atoms {
                    check_dim(self.dim, a.point.len())?;
                    if !(a.mass >= 0.0) {
                        return Err(Error::param("mass", "atom masses must be nonnegative"));
                    }
                }
                Ok(())
            }
            MeasureKind::Mixture { components } => {
                for c in components {
                    check_dim(self.dim, c.measure.dim)?;
                    if !(c.weight >= 0.0) {
                        return Err(Error::param("weight", "mixture weights must be nonnegative"));
                    }
                    c.measure.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Local dimension of the measure (Lebesgue-type d, surface d-1, atoms 0).
    pub fn local_dimension(&self) -> f64 {
        match &self.kind {
            MeasureKind::Lebesgue { .. } | MeasureKind::Density { .. } => self.dim as f64,
            MeasureKind::SphereSurface { .. } => self.dim as f64 - 1.0,
            MeasureKind::Atoms { .. } => 0.0,
            MeasureKind::Mixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| c.measure.local_dimension())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Whether the support is bounded, with a circumradius about the origin.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            MeasureKind::Lebesgue { domain } | MeasureKind::Density { domain, .. } => {
                domain.circumradius()
            }
            MeasureKind::SphereSurface { center, radius } => Some(norm(center) + radius),
            MeasureKind::Atoms { atoms } => Some(
                atoms
                    .iter()
                    .filter(|a| a.mass > 0.0)
                    .map(|a| norm(&a.point))
                    .fold(0.0, f64::max),
            ),
            MeasureKind::Mixture { components } => {
                let mut m: f64 = 0.0;
                for c in components.iter().filter(|c| c.weight > 0.0) {
                    m = m.max(c.measure.support_radius()?);
                }
                Some(m)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            MeasureKind::Atoms { atoms } => atoms.iter().all(|a| a.mass == 0.0),
            MeasureKind::Density { density, .. } => density.sup() == 0.0,
            MeasureKind::Mixture { components } => components
                .iter()
                .all(|c| c.weight == 0.0 || c.measure.is_zero()),
            _ => false,
        }
    }

    /// `μ(ℝ^d)`, possibly `+∞`.
    pub fn total_mass(&self) -> f64 {
        if let Some(h) = self.total_mass_hint {
            return h;
        }
        self.integrate(None, None, &[]).map(|i| i.value).unwrap_or(f64::INFINITY)
    }

    /// `μ(B_r(x))` for the open ball.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        if !(r > 0.0) {
            return Err(Error::param("r", "radius must be positive"));
        }
        match &self.kind {
            MeasureKind::Lebesgue { .. } | MeasureKind::Density { .. } => {
                let ball = Domain::ball(x.to_vec(), r)?;
                let tol = Tolerance::new(1e-8, 0.0);
                Ok(self.integrate_with(None, Some(&ball), &[], tol)?.value)
            }
            MeasureKind::SphereSurface { center, radius } => {
                let dist = dist2(x, center).sqrt();
                let frac = shell_fraction_in_ball(self.dim, dist, *radius, r);
                Ok(frac * radius.powi(self.dim as i32 - 1) * sphere_area(self.dim))
            }
            MeasureKind::Atoms { atoms } => Ok(atoms
                .iter()
                .filter(|a| dist2(&a.point, x) < r * r)
                .map(|a| a.mass)
                .sum()),
            MeasureKind::Mixture { components } => {
                let mut s = 0.0;
                for c in components {
                    if c.weight > 0.0 {
                        s += c.weight * c.measure.ball_mass(x, r)?;
                    }
                }
                Ok(s)
            }
        }
    }

    /// `∫_region f dμ`; `f = None` integrates 1.
    ///
    /// A declared singularity switches to polar coordinates about its point;
    /// orders that are not integrable against the local dimension of μ yield
    /// the `Infinite` status instead of an error.
    pub fn integrate(
        &self,
        f: Option<&dyn Fn(&[f64]) -> f64>,
        region: Option<&Domain>,
        singularities: &[Singularity],
    ) -> Result<Integral> {
        self.integrate_with(f, region, singularities, MEASURE_TOL)
    }

    pub fn integrate_with(
        &self,
        f: Option<&dyn Fn(&[f64]) -> f64>,
        region: Option<&Domain>,
        singularities: &[Singularity],
        tol: Tolerance,
    ) -> Result<Integral> {
        if let Some(r) = region {
            check_dim(self.dim, r.dim)?;
        }
        for s in singularities {
            check_dim(self.dim, s.point.len())?;
        }
        if singularities.len() > 1 {
            return Err(Error::Unsupported(
                "at most one declared singular point per integral".into(),
            ));
        }
        let in_region = |y: &[f64]| region.is_none_or(|r| r.contains_unchecked(y));
        match &self.kind {
            MeasureKind::Atoms { atoms } => {
                let mut v = 0.0;
                for a in atoms.iter().filter(|a| a.mass > 0.0 && in_region(&a.point)) {
                    let hit = singularities
                        .iter()
                        .any(|s| s.point == a.point && !matches!(s.order, SingularOrder::Bounded));
                    if hit {
                        return Ok(Integral::infinite());
                    }
                    v += a.mass * f.map_or(1.0, |f| f(&a.point));
                }
                Ok(Integral {
                    value: v,
                    error: 0.0,
                    status: if v.is_infinite() {
                        QuadStatus::Infinite
                    } else {
                        QuadStatus::Converged
                    },
                })
            }
            MeasureKind::Mixture { components } => {
                let mut acc = Integral {
                    value: 0.0,
                    error: 0.0,
                    status: QuadStatus::Converged,
                };
                for c in components.iter().filter(|c| c.weight > 0.0) {
                    let part = c.measure.integrate_with(f, region, singularities, tol)?;
                    acc = acc.add(part, c.weight);
                }
                Ok(acc)
            }
            MeasureKind::SphereSurface { center, radius } => {
                let sing = singularities.first();
                sphere_integral(self.dim, center, *radius, f, region, sing, tol)
            }
            MeasureKind::Lebesgue { domain } | MeasureKind::Density { domain, .. } => {
                let density = match &self.kind {
                    MeasureKind::Density { density, .. } => Some(density),
                    _ => None,
                };
                let set = match region {
                    Some(r) => Domain::intersection(vec![domain.clone(), r.clone()])?,
                    None => domain.clone(),
                };
                match singularities.first() {
                    Some(s) if !matches!(s.order, SingularOrder::Bounded) => {
                        if set.contains_unchecked(&s.point)
                            && s.order.diverges_in(self.dim as f64)
                            && density.is_none_or(|g| g.eval(&s.point) > 0.0)
                        {
                            return Ok(Integral::infinite());
                        }
                        polar_integral(&set, density, f, s, tol)
                    }
                    _ => Ok(Integral::from_quad(iterated_integral(
                        &set, density, f, tol,
                    ))),
                }
            }
        }
    }

    /// Weighted sample whose weighted mean estimates `∫ f dμ / μ(env)`.
    ///
    /// Weights have expectation 1. `envelope` restricts Lebesgue-type
    /// measures to a bounded window and is required when they have infinite
    /// mass.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
        envelope: Option<&Domain>,
    ) -> Result<Vec<(Vec<f64>, f64)>> {
        let mut out = Vec::with_capacity(n);
        match &self.kind {
            MeasureKind::Atoms { atoms } => {
                let live: Vec<&Atom> = atoms
                    .iter()
                    .filter(|a| a.mass > 0.0 && envelope.is_none_or(|e| e.contains_unchecked(&a.point)))
                    .collect();
                let total: f64 = live.iter().map(|a| a.mass).sum();
                if total == 0.0 {
                    return Err(Error::param("measure", "zero mass inside the envelope"));
                }
                for _ in 0..n {
                    let mut u = rng.random::<f64>() * total;
                    let mut pick = live[live.len() - 1];
                    for a in &live {
                        if u < a.mass {
                            pick = a;
                            break;
                        }
                        u -= a.mass;
                    }
                    out.push((pick.point.clone(), 1.0));
                }
            }
            MeasureKind::SphereSurface { center, radius } => {
                for _ in 0..n {
                    let dir = random_direction(self.dim, rng);
                    let p = center.iter().zip(&dir).map(|(c, e)| c + radius * e).collect();
                    out.push((p, 1.0));
                }
            }
            MeasureKind::Lebesgue { domain } | MeasureKind::Density { domain, .. } => {
                let set = match envelope {
                    Some(e) => Domain::intersection(vec![domain.clone(), e.clone()])?,
                    None => domain.clone(),
                };
                let bounds = set.axis_bounds();
                if bounds.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
                    return Err(Error::InfiniteMass);
                }
                let scale = match &self.kind {
                    MeasureKind::Density { density, .. } => {
                        let vol = iterated_integral(&set, None, None, MEASURE_TOL).value;
                        let mass = iterated_integral(&set, Some(density), None, MEASURE_TOL).value;
                        if mass == 0.0 {
                            return Err(Error::param("measure", "zero mass inside the envelope"));
                        }
                        vol / mass
                    }
                    _ => 1.0,
                };
                let max_tries = 10_000usize.max(n * 10_000);
                let mut tries = 0;
                while out.len() < n {
                    tries += 1;
                    if tries > max_tries {
                        return Err(Error::param(
                            "envelope",
                            "rejection sampler could not hit the domain",
                        ));
                    }
                    let y: Vec<f64> = bounds
                        .iter()
                        .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                        .collect();
                    if set.contains_unchecked(&y) {
                        let w = match &self.kind {
                            MeasureKind::Density { density, .. } => density.eval(&y) * scale,
                            _ => 1.0,
                        };
                        out.push((y, w));
                    }
                }
            }
            MeasureKind::Mixture { components } => {
                let masses: Vec<f64> = components
                    .iter()
                    .map(|c| {
                        if c.weight == 0.0 {
                            0.0
                        } else {
                            let m = match envelope {
                                Some(e) => c.measure.integrate(None, Some(e), &[]).map(|i| i.value),
                                None => Ok(c.measure.total_mass()),
                            };
                            c.weight * m.unwrap_or(f64::INFINITY)
                        }
                    })
                    .collect();
                if masses.iter().any(|m| m.is_infinite()) {
                    return Err(Error::InfiniteMass);
                }
                let total: f64 = masses.iter().sum();
                if total == 0.0 {
                    return Err(Error::param("measure", "zero mass"));
                }
                let mut counts = vec![0usize; components.len()];
                for _ in 0..n {
                    let mut u = rng.random::<f64>() * total;
                    let mut k = components.len() - 1;
                    for (i, m) in masses.iter().enumerate() {
                        if u < *m {
                            k = i;
                            break;
                        }
                        u -= m;
                    }
                    counts[k] += 1;
                }
                for (c, &cnt) in components.iter().zip(&counts) {
                    if cnt > 0 {
                        out.extend(c.measure.sample(cnt, rng, envelope)?);
                    }
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn random_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Iterated integral of `density · f` over `set`: axis 0 along exact chords,
/// remaining axes by nested adaptive quadrature.
fn iterated_integral(
    set: &Domain,
    density: Option<&DensityFn>,
    f: Option<&dyn Fn(&[f64]) -> f64>,
    tol: Tolerance,
) -> QuadResult {
    let bounds = set.axis_bounds();
    let mut point = vec![0.0; set.dim];
    iterate_axis(set, density, f, tol, &bounds, set.dim - 1, &mut point)
}

fn iterate_axis(
    set: &Domain,
    density: Option<&DensityFn>,
    f: Option<&dyn Fn(&[f64]) -> f64>,
    tol: Tolerance,
    bounds: &[(f64, f64)],
    axis: usize,
    point: &mut Vec<f64>,
) -> QuadResult {
    if axis == 0 {
        let chord = set.line_intervals(point, 0);
        let trivial = f.is_none() && density.is_none_or(|g| matches!(g, DensityFn::Constant { .. }));
        if trivial {
            let c = density.map_or(1.0, |g| g.sup());
            let len = chord.length();
            return QuadResult {
                value: if c == 0.0 { 0.0 } else { c * len },
                error: 0.0,
                evals: 1,
                converged: true,
            };
        }
        let mut total = QuadResult::zero();
        let inner_tol = Tolerance {
            rel: tol.rel * 0.1,
            ..tol
        };
        for &(a, b) in &chord.0 {
            let mut p = point.clone();
            let mut brk = Vec::new();
            if let Some(c) = density.and_then(|g| g.center()) {
                brk.push(c[0]);
            }
            total = total
                + quad_range(
                    |t| {
                        p[0] = t;
                        let g = density.map_or(1.0, |g| g.eval(&p));
                        if g == 0.0 {
                            0.0
                        } else {
                            g * f.map_or(1.0, |f| f(&p))
                        }
                    },
                    a,
                    b,
                    &brk,
                    inner_tol,
                );
        }
        return total;
    }
    let (lo, hi) = bounds[axis];
    let mut brk = set.breakpoints(axis);
    if let Some(c) = density.and_then(|g| g.center()) {
        brk.push(c[axis]);
    }
    let inner_tol = Tolerance {
        rel: tol.rel * 0.3,
        abs: tol.abs * 0.1,
        ..tol
    };
    let mut converged = true;
    let mut evals = 0;
    let mut r = quad_range(
        |t| {
            point[axis] = t;
            let q = iterate_axis(set, density, f, inner_tol, bounds, axis - 1, point);
            converged &= q.converged;
            evals += q.evals;
            q.value
        },
        lo,
        hi,
        &brk,
        tol,
    );
    r.converged &= converged;
    r.evals += evals;
    r
}

/// Fixed angular rule on `S^{d-1}` for d ≤ 3: (direction, weight) with weights
/// summing to `|S^{d-1}|`.
pub(crate) fn sphere_rule(dim: usize, n_polar: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    match dim {
        1 => Ok(vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)]),
        2 => {
            let n = 4 * n_polar;
            Ok((0..n)
                .map(|k| {
                    let t = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                    (vec![t.cos(), t.sin()], 2.0 * PI / n as f64)
                })
                .collect())
        }
        3 => {
            let (x, w) = quad::gauss_legendre(n_polar);
            let nphi = 2 * n_polar;
            let mut out = Vec::with_capacity(n_polar * nphi);
            for (ct, wt) in x.iter().zip(&w) {
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                for k in 0..nphi {
                    let ph = 2.0 * PI * (k as f64 + 0.5) / nphi as f64;
                    out.push((
                        vec![st * ph.cos(), st * ph.sin(), *ct],
                        wt * 2.0 * PI / nphi as f64,
                    ));
                }
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported(format!(
            "polar integration with a declared singularity in d = {dim}"
        ))),
    }
}

fn polar_integral(
    set: &Domain,
    density: Option<&DensityFn>,
    f: Option<&dyn Fn(&[f64]) -> f64>,
    sing: &Singularity,
    tol: Tolerance,
) -> Result<Integral> {
    let d = set.dim;
    let x = &sing.point;
    let rule = sphere_rule(d, 32)?;
    // radial integrand ~ s^{d-1-γ} near 0
    let exponent = (d as f64 - 1.0) - sing.order.gamma();
    let mut total = QuadResult::zero();
    for (dir, w) in &rule {
        let chord = set.ray_intervals(x, dir).clip(0.0, f64::INFINITY);
        for &(a, b) in &chord.0 {
            let mut p = x.clone();
            let mut integrand = |s: f64| {
                for k in 0..d {
                    p[k] = x[k] + s * dir[k];
                }
                let g = density.map_or(1.0, |g| g.eval(&p));
                if g == 0.0 {
                    return 0.0;
                }
                g * f.map_or(1.0, |f| f(&p)) * s.powi(d as i32 - 1)
            };
            let q = if a <= 0.0 {
                if b.is_finite() {
                    quad::power_singular_left(&mut integrand, 0.0, b, exponent, &[], tol)
                } else {
                    quad::power_singular_left(&mut integrand, 0.0, 1.0, exponent, &[], tol)
                        + quad::semi_infinite(&mut integrand, 1.0, 1.0, &[], tol)
                }
            } else {
                quad_range(&mut integrand, a, b, &[], tol)
            };
            total = total + q.scale(*w);
        }
    }
    Ok(Integral::from_quad(total))
}

/// Surface integral over the sphere `|y - c| = R`, in polar coordinates
/// whose pole points at the singular point (if any).
fn sphere_integral(
    dim: usize,
    center: &[f64],
    radius: f64,
    f: Option<&dyn Fn(&[f64]) -> f64>,
    region: Option<&Domain>,
    sing: Option<&Singularity>,
    tol: Tolerance,
) -> Result<Integral> {
    if dim > 3 {
        return Err(Error::Unsupported(format!("surface integrals in d = {dim}")));
    }
    let area_scale = radius.powi(dim as i32 - 1);
    // pole direction
    let mut pole = vec![0.0; dim];
    pole[dim - 1] = 1.0;
    let mut on_sphere = false;
    let mut gamma = 0.0;
    if let Some(s) = sing {
        let v: Vec<f64> = s.point.iter().zip(center).map(|(p, c)| p - c).collect();
        let n = norm(&v);
        if n > 0.0 {
            pole = v.iter().map(|x| x / n).collect();
        }
        if (n - radius).abs() <= 1e-12 * radius.max(1.0) && !matches!(s.order, SingularOrder::Bounded) {
            let in_reg = region.is_none_or(|r| r.contains_unchecked(&s.point));
            if in_reg {
                on_sphere = true;
                gamma = s.order.gamma();
                if s.order.diverges_in(dim as f64 - 1.0) {
                    return Ok(Integral::infinite());
                }
            }
        }
    }
    let (e1, e2) = orthonormal_complement(&pole);
    let eval = |psi: f64, phi: f64| -> f64 {
        let (sp, cp) = psi.sin_cos();
        let y: Vec<f64> = (0..dim)
            .map(|k| {
                let mut v = cp * pole[k] + sp * phi.cos() * e1[k];
                if dim == 3 {
                    v += sp * phi.sin() * e2[k];
                }
                center[k] + radius * v
            })
            .collect();
        if region.is_some_and(|r| !r.contains_unchecked(&y)) {
            return 0.0;
        }
        f.map_or(1.0, |f| f(&y))
    };
    let integrand = |psi: f64| -> f64 {
        match dim {
            2 => eval(psi, 0.0) + eval(psi, PI),
            _ => {
                // azimuthal trapezoid (periodic)
                let n = 64;
                let s: f64 = (0..n)
                    .map(|k| eval(psi, 2.0 * PI * (k as f64 + 0.5) / n as f64))
                    .sum();
                s * 2.0 * PI / n as f64 * psi.sin()
            }
        }
    };
    let exponent = dim as f64 - 2.0 - gamma;
    let breaks: Vec<f64> = region_polar_breaks(region, center, radius, &pole);
    let q = if on_sphere {
        quad::power_singular_left(integrand, 0.0, PI, exponent, &breaks, tol)
    } else {
        quad::adaptive_with_breaks(integrand, 0.0, PI, &breaks, tol)
    };
    Ok(Integral::from_quad(q.scale(area_scale)))
}

fn region_polar_breaks(region: Option<&Domain>, center: &[f64], radius: f64, pole: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut push_ball = |c: &[f64], r: f64| {
        let v: Vec<f64> = c.iter().zip(center).map(|(a, b)| a - b).collect();
        let dist = norm(&v);
        if dist == 0.0 {
            return;
        }
        // only exact when the ball centre lies on the pole axis
        let cosang = v.iter().zip(pole).map(|(a, b)| a * b).sum::<f64>() / dist;
        if (cosang.abs() - 1.0).abs() < 1e-12 {
            let cpsi = (radius * radius + dist * dist - r * r) / (2.0 * radius * dist);
            if cpsi.abs() < 1.0 {
                let psi = cpsi.acos();
                out.push(if cosang > 0.0 { psi } else { PI - psi });
            }
        }
    };
    fn walk(d: &Domain, f: &mut dyn FnMut(&[f64], f64)) {
        match &d.kind {
            DomainKind::Ball { center, radius } | DomainKind::Exterior { center, radius } => {
                f(center, *radius)
            }
            DomainKind::Union { parts } | DomainKind::Intersection { parts } => {
                for p in parts {
                    walk(p, f);
                }
            }
            _ => {}
        }
    }
    if let Some(r) = region {
        walk(r, &mut push_ball);
    }
    out
}

pub(crate) fn orthonormal_complement(u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = u.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        let mut v = e;
        let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        for (vi, ui) in v.iter_mut().zip(u) {
            *vi -= dot * ui;
        }
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
        if basis.len() == 2 {
            break;
        }
    }
    while basis.len() < 2 {
        basis.push(vec![0.0; d]);
    }
    (basis[0].clone(), basis[1].clone())
}

// ---------------------------------------------------------------------------
// B0 profile
// ---------------------------------------------------------------------------

/// Points on the unit sphere used as starts of the direction search.
fn direction_starts(dim: usize, n: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci lattice in the first three coordinates, axis directions added.
            let golden = PI * (3.0 - 5f64.sqrt());
            let mut out: Vec<Vec<f64>> = (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    let mut v = vec![0.0; dim];
                    v[0] = r * t.cos();
                    v[1] = r * t.sin();
                    v[2] = z;
                    v
                })
                .collect();
            for k in 0..dim {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; dim];
                    v[k] = s;
                    out.push(v);
                }
            }
            out
        }
    }
}

/// `R ↦ sup_{|x| = R} m(D ∩ B_1(x))` with a limit-to-zero verdict.
///
/// Bounded domains short-circuit to IN. The supremum is searched from
/// `64·d` start directions; the best few are refined by a shrinking
/// pattern search on the sphere.
pub fn b0_profile(domain: &Domain, radii: &[f64]) -> Result<DecayProfile> {
    domain.validate()?;
    let leb = MeasureSpec::lebesgue(domain.clone());
    let d = domain.dim;
    let starts = direction_starts(d, 64 * d);
    let mut notes = Vec::new();
    let mut points = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::param("radii", "must be positive"));
        }
        if let Some(cr) = domain.circumradius() {
            if r >= cr + 1.0 {
                points.push((r, 0.0));
                continue;
            }
        }
        let mass_at = |dir: &[f64]| -> f64 {
            let x: Vec<f64> = dir.iter().map(|v| v * r).collect();
            leb.ball_mass(&x, 1.0).unwrap_or(f64::NAN)
        };
        let mut scored: Vec<(f64, Vec<f64>)> = starts.iter().map(|s| (mass_at(s), s.clone())).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best = scored[0].0;
        for (v0, s0) in scored.iter().take(4) {
            let (v, _) = refine_direction(&mass_at, s0.clone(), *v0, 0.5 / r.max(1.0));
            best = best.max(v);
        }
        if best == 0.0 && !domain.bounded() {
            notes.push(format!("R={r}: no start direction touched the domain"));
        }
        points.push((r, best));
    }
    let rule = DecisionRule::default();
    let mut p = DecayProfile::from_points("b0", Limit::Infinity, points, &rule);
    if domain.bounded() {
        p.verdict = Verdict::In;
        p.notes.push("bounded domain".into());
    }
    p.notes.extend(notes);
    Ok(p)
}

fn refine_direction(
    f: &dyn Fn(&[f64]) -> f64,
    mut dir: Vec<f64>,
    mut val: f64,
    mut step: f64,
) -> (f64, Vec<f64>) {
    let d = dir.len();
    if d == 1 {
        return (val, dir);
    }
    for _ in 0..40 {
        let (e1, e2) = orthonormal_complement(&dir);
        let mut moves = vec![e1.clone(), e1.iter().map(|v| -v).collect::<Vec<_>>()];
        if d >= 3 {
            moves.push(e2.clone());
            moves.push(e2.iter().map(|v| -v).collect());
        }
        let mut improved = false;
        for m in &moves {
            let cand: Vec<f64> = dir.iter().zip(m).map(|(a, b)| a + step * b).collect();
            let n = norm(&cand);
            let cand: Vec<f64> = cand.into_iter().map(|v| v / n).collect();
            let v = f(&cand);
            if v > val {
                val = v;
                dir = cand;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }
    (val, dir)
}
