//! Heat, resolvent and Green kernels of Brownian motion and (relativistic)
//! symmetric α-stable processes, the relativistic jump kernel and its
//! profile function Ψ, and two-sided heat-kernel envelopes.
//!
//! Conventions: Brownian motion has generator ½Δ, so `ψ(ρ) = ρ²/2`; the
//! stable process has `ψ(ρ) = ρ^α`; the relativistic process has
//! `ψ(ρ) = (ρ² + m^{2/α})^{α/2} - m`. All kernels are radial, so every
//! evaluation goes through `r = |x - y|` and is symmetric by construction.
//!
//! Isotropic transforms use `p(r) = c_d ∫ ρ^{d-1} e^{-tψ(ρ)} Λ_d(ρ r) dρ`
//! with `c_d = (2π)^{-d}|S^{d-1}|` and `Λ_d` the spherical mean of a plane
//! wave. Stable kernels are tabulated once per `(d, α)` at `t = 1` and
//! rescaled.

use crate::error::{check_dim, Error, Result};
use crate::geometry::{dist2, SingularOrder};
use crate::quad::{self, QuadResult, Tolerance};
use crate::special::{gamma, ln_gamma, sphere_area, spherical_mean};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

// ---------------------------------------------------------------------------
// Process specification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    Brownian,
    Stable { alpha: f64 },
    Relativistic { alpha: f64, m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: ProcessKind,
}

impl ProcessSpec {
    pub fn new(dim: usize, kind: ProcessKind) -> Result<Self> {
        let s = ProcessSpec { dim, kind };
        s.validate()?;
        Ok(s)
    }

    pub fn brownian(dim: usize) -> Self {
        ProcessSpec {
            dim,
            kind: ProcessKind::Brownian,
        }
    }

    pub fn stable(dim: usize, alpha: f64) -> Result<Self> {
        ProcessSpec::new(dim, ProcessKind::Stable { alpha })
    }

    pub fn relativistic(dim: usize, alpha: f64, m: f64) -> Result<Self> {
        ProcessSpec::new(dim, ProcessKind::Relativistic { alpha, m })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("dim", "dimension must be ≥ 1"));
        }
        match self.kind {
            ProcessKind::Brownian => Ok(()),
            ProcessKind::Stable { alpha } => check_alpha(alpha),
            ProcessKind::Relativistic { alpha, m } => {
                check_alpha(alpha)?;
                if !(m > 0.0 && m.is_finite()) {
                    return Err(Error::param("m", "relativistic mass must be positive"));
                }
                Ok(())
            }
        }
    }

    /// Scaling index: 2 for Brownian motion, α otherwise.
    pub fn index(&self) -> f64 {
        match self.kind {
            ProcessKind::Brownian => 2.0,
            ProcessKind::Stable { alpha } | ProcessKind::Relativistic { alpha, .. } => alpha,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            ProcessKind::Brownian => None,
            ProcessKind::Stable { alpha } | ProcessKind::Relativistic { alpha, .. } => Some(alpha),
        }
    }

    pub fn mass(&self) -> f64 {
        match self.kind {
            ProcessKind::Relativistic { m, .. } => m,
            _ => 0.0,
        }
    }

    /// `(ν, β) = (d, scaling index)` identifying the reference kernel.
    pub fn reference_exponents(&self) -> (f64, f64) {
        (self.dim as f64, self.index())
    }

    /// Whether the process is transient, i.e. has a finite 0-order kernel.
    pub fn transient(&self) -> bool {
        let d = self.dim as f64;
        match self.kind {
            ProcessKind::Brownian => self.dim >= 3,
            ProcessKind::Stable { alpha } => d > alpha,
            ProcessKind::Relativistic { .. } => self.dim >= 3,
        }
    }

    /// Index governing the large-scale behaviour (diffusive for relativistic).
    pub fn large_scale_index(&self) -> f64 {
        match self.kind {
            ProcessKind::Relativistic { .. } => 2.0,
            _ => self.index(),
        }
    }

    /// Characteristic exponent `ψ(|ξ|)`.
    pub fn exponent(&self, rho: f64) -> f64 {
        match self.kind {
            ProcessKind::Brownian => 0.5 * rho * rho,
            ProcessKind::Stable { alpha } => rho.powf(alpha),
            ProcessKind::Relativistic { alpha, m } => {
                let m2 = m.powf(2.0 / alpha);
                m * (0.5 * alpha * (rho * rho / m2).ln_1p()).exp_m1()
            }
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            ProcessKind::Brownian => format!("brownian(d={})", self.dim),
            ProcessKind::Stable { alpha } => format!("stable(d={},alpha={})", self.dim, alpha),
            ProcessKind::Relativistic { alpha, m } => {
                format!("relativistic(d={},alpha={},m={})", self.dim, alpha, m)
            }
        }
    }

    /// Local behaviour of the λ-order kernel as `r → 0`.
    pub fn resolvent_singularity(&self) -> SingularOrder {
        let d = self.dim as f64;
        let b = self.index();
        if d > b {
            SingularOrder::Power { gamma: d - b }
        } else if d == b {
            SingularOrder::Log
        } else {
            SingularOrder::Bounded
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::param("alpha", "need 0 < α < 2"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Kernel values
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    LaplaceQuadrature,
    FourierQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    /// Nonnegative; `+∞` on the diagonal of singular kernels.
    pub value: f64,
    pub error_estimate: f64,
    pub method: Method,
    pub converged: bool,
}

impl KernelValue {
    fn closed(value: f64) -> Self {
        KernelValue {
            value,
            error_estimate: 0.0,
            method: Method::ClosedForm,
            converged: true,
        }
    }

    fn from_quad(q: QuadResult, scale: f64, method: Method) -> Self {
        KernelValue {
            value: (q.value * scale).max(0.0),
            error_estimate: (q.error * scale).abs(),
            method,
            converged: q.converged,
        }
    }

}

fn radius(dim: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(dim, x.len())?;
    check_dim(dim, y.len())?;
    Ok(dist2(x, y).sqrt())
}

/// `(2π)^{-d}|S^{d-1}|`.
pub fn fourier_constant(d: usize) -> f64 {
    sphere_area(d) / (2.0 * PI).powi(d as i32)
}

// ---------------------------------------------------------------------------
// Heat kernels
// ---------------------------------------------------------------------------

/// Transition density `p_t(x, y)`.
pub fn heat_kernel(spec: &ProcessSpec, t: f64, x: &[f64], y: &[f64]) -> Result<KernelValue> {
    let r = radius(spec.dim, x, y)?;
    heat_kernel_radial(spec, t, r)
}

/// Transition density as a function of `r = |x - y|`.
pub fn heat_kernel_radial(spec: &ProcessSpec, t: f64, r: f64) -> Result<KernelValue> {
    spec.validate()?;
    if !(t > 0.0) {
        return Err(Error::param("t", "time must be positive"));
    }
    let d = spec.dim;
    Ok(match spec.kind {
        ProcessKind::Brownian => KernelValue::closed(gaussian(d, t, r)),
        ProcessKind::Stable { alpha } if alpha == 1.0 => KernelValue::closed(cauchy(d, t, r)),
        ProcessKind::Stable { alpha } => {
            let tab = stable_table(d, alpha);
            let s = r * t.powf(-1.0 / alpha);
            let (v, e) = tab.eval(s);
            let c = t.powf(-(d as f64) / alpha);
            KernelValue {
                value: v * c,
                error_estimate: e * c,
                method: Method::FourierQuadrature,
                converged: true,
            }
        }
        ProcessKind::Relativistic { .. } => heat_kernel_fourier(spec, t, r),
    })
}

/// `(2πt)^{-d/2} e^{-r²/2t}`.
pub fn gaussian(d: usize, t: f64, r: f64) -> f64 {
    (2.0 * PI * t).powf(-(d as f64) / 2.0) * (-r * r / (2.0 * t)).exp()
}

/// Cauchy kernel in ℝ^d: `Γ((d+1)/2) π^{-(d+1)/2} t / (t² + r²)^{(d+1)/2}`.
pub fn cauchy(d: usize, t: f64, r: f64) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    gamma(h) * PI.powf(-h) * t / (t * t + r * r).powf(h)
}

/// Radial Fourier inversion of `e^{-tψ}` by adaptive Gauss–Kronrod on
/// half-period panels. Used for every non-closed-form heat kernel.
pub fn heat_kernel_fourier(spec: &ProcessSpec, t: f64, r: f64) -> KernelValue {
    let d = spec.dim;
    let df = d as f64;
    // cutoff: tψ(ρ) beyond ~45 + (d-1) ln ρ is negligible
    let mut rho_max = 1.0;
    while t * spec.exponent(rho_max) < 45.0 + (df - 1.0) * rho_max.max(1.0).ln() {
        rho_max *= 1.5;
    }
    let scale = (1.0 / t).powf(1.0 / spec.index()).min(rho_max);
    let mut breaks: Vec<f64> = (1..40).map(|k| scale * 0.5f64.powi(k)).collect();
    breaks.push(scale);
    if r > 0.0 {
        let step = PI / r;
        let n = (rho_max / step).ceil() as usize;
        let stride = n.div_ceil(200_000).max(1);
        breaks.extend((1..n).step_by(stride).map(|k| k as f64 * step));
    }
    let integrand = |rho: f64| {
        if rho == 0.0 {
            return if d == 1 { 1.0 } else { 0.0 };
        }
        let w = (-t * spec.exponent(rho)).exp();
        if w == 0.0 {
            return 0.0;
        }
        rho.powi(d as i32 - 1) * w * spherical_mean(d, rho * r)
    };
    let peak = diag_scale(spec, t);
    let tol = Tolerance::new(1e-10, 1e-15 * peak / fourier_constant(d))
        .with_max_subdivisions(breaks.len() * 4 + 2000);
    let q = quad::adaptive_with_breaks(integrand, 0.0, rho_max, &breaks, tol);
    KernelValue::from_quad(q, fourier_constant(d), Method::FourierQuadrature)
}

/// Order of magnitude of `p_t(x, x)`.
fn diag_scale(spec: &ProcessSpec, t: f64) -> f64 {
    let d = spec.dim as f64;
    match spec.kind {
        ProcessKind::Relativistic { alpha, m } => {
            m.powf(d / alpha - d / 2.0) * (t.powf(-d / alpha) + t.powf(-d / 2.0))
        }
        _ => t.powf(-d / spec.index()),
    }
}

/// Exact on-diagonal value of the stable kernel at `t = 1`:
/// `c_d Γ(d/α)/α`.
pub fn stable_p1_diagonal(d: usize, alpha: f64) -> f64 {
    fourier_constant(d) * gamma(d as f64 / alpha) / alpha
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

/// Positive function tabulated on a uniform grid in `ln x` and interpolated
/// by cubic Hermite splines in `(ln x, ln f)`.
#[derive(Debug, Clone)]
pub(crate) struct LogTable {
    lx0: f64,
    dlx: f64,
    ly: Vec<f64>,
}

impl LogTable {
    pub(crate) fn build(x_min: f64, x_max: f64, per_decade: usize, mut f: impl FnMut(f64) -> f64) -> Self {
        let decades = (x_max / x_min).log10();
        let n = ((decades * per_decade as f64).ceil() as usize).max(4) + 1;
        let lx0 = x_min.ln();
        let dlx = (x_max.ln() - lx0) / (n - 1) as f64;
        let ly = (0..n)
            .map(|i| f((lx0 + dlx * i as f64).exp()).max(f64::MIN_POSITIVE).ln())
            .collect();
        LogTable { lx0, dlx, ly }
    }

    pub(crate) fn from_values(x_min: f64, dlx: f64, values: &[f64]) -> Self {
        LogTable {
            lx0: x_min.ln(),
            dlx,
            ly: values.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect(),
        }
    }

    pub(crate) fn x_min(&self) -> f64 {
        self.lx0.exp()
    }

    pub(crate) fn x_max(&self) -> f64 {
        (self.lx0 + self.dlx * (self.ly.len() - 1) as f64).exp()
    }

    pub(crate) fn first(&self) -> f64 {
        self.ly[0].exp()
    }

    pub(crate) fn last(&self) -> f64 {
        self.ly[self.ly.len() - 1].exp()
    }

    fn slope(&self, i: usize) -> f64 {
        let n = self.ly.len();
        if i == 0 {
            (self.ly[1] - self.ly[0]) / self.dlx
        } else if i == n - 1 {
            (self.ly[n - 1] - self.ly[n - 2]) / self.dlx
        } else if i == 1 || i == n - 2 {
            (self.ly[i + 1] - self.ly[i - 1]) / (2.0 * self.dlx)
        } else {
            let y = &self.ly;
            (8.0 * (y[i + 1] - y[i - 1]) - (y[i + 2] - y[i - 2])) / (12.0 * self.dlx)
        }
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        let u = (x.ln() - self.lx0) / self.dlx;
        let n = self.ly.len();
        let i = (u.floor().max(0.0) as usize).min(n - 2);
        let s = (u - i as f64).clamp(0.0, 1.0);
        let (y0, y1) = (self.ly[i], self.ly[i + 1]);
        let (m0, m1) = (self.slope(i) * self.dlx, self.slope(i + 1) * self.dlx);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1).exp()
    }
}

/// `p_1` of the d-dimensional α-stable process, α ≠ 1.
#[derive(Debug)]
pub(crate) struct StableTable {
    d: usize,
    alpha: f64,
    p0: f64,
    table: LogTable,
    /// Beyond this argument the large-`s` series is used.
    s_series: f64,
    series_ok: bool,
    rel_err: f64,
}

const STABLE_S_MIN: f64 = 1e-4;

impl StableTable {
    fn build(d: usize, alpha: f64) -> Self {
        let spec = ProcessSpec {
            dim: d,
            kind: ProcessKind::Stable { alpha },
        };
        let p0 = stable_p1_diagonal(d, alpha);
        // first grid point where the series is trustworthy
        let mut s_series = None;
        let mut s = 1.0;
        while s <= 200.0 {
            if let Some((v, e, big)) = stable_series(d, alpha, s) {
                if e < 1e-12 * v.abs() && big < 1e3 * v.abs() && v > 0.0 {
                    s_series = Some(s);
                    break;
                }
            }
            s *= 1.25;
        }
        let (s_hi, series_ok) = match s_series {
            Some(s) => (s, true),
            None => (200.0, false),
        };
        let mut rel_err: f64 = 0.0;
        let table = LogTable::build(STABLE_S_MIN, s_hi, 60, |s| {
            let k = heat_kernel_fourier(&spec, 1.0, s);
            if k.value > 0.0 {
                rel_err = rel_err.max(k.error_estimate / k.value);
            }
            k.value
        });
        StableTable {
            d,
            alpha,
            p0,
            table,
            s_series: s_hi,
            series_ok,
            rel_err,
        }
    }

    /// `(p_1(s), error estimate)`.
    fn eval(&self, s: f64) -> (f64, f64) {
        if s < STABLE_S_MIN {
            let v1 = self.table.first();
            let v = self.p0 - (self.p0 - v1) * (s / STABLE_S_MIN).powi(2);
            return (v, v * self.rel_err);
        }
        if s <= self.s_series {
            let v = self.table.eval(s);
            return (v, v * self.rel_err.max(1e-9));
        }
        if self.series_ok {
            if let Some((v, e, _)) = stable_series(self.d, self.alpha, s) {
                return (v, e);
            }
        }
        let v = self.table.last() * (self.s_series / s).powf(self.d as f64 + self.alpha);
        (v, v * 1e-2)
    }
}

/// Large-argument series of the stable density at `t = 1`:
/// `Σ_k (-1)^{k+1}/k! sin(παk/2) 2^{αk} Γ((αk+d)/2) Γ(αk/2+1) π^{-d/2-1} s^{-αk-d}`.
///
/// Returns `(sum, truncation error, largest term)` or `None` when the terms
/// never become small.
fn stable_series(d: usize, alpha: f64, s: f64) -> Option<(f64, f64, f64)> {
    let df = d as f64;
    let ls = s.ln();
    let mut sum: f64 = 0.0;
    let mut big: f64 = 0.0;
    let mut last = f64::INFINITY;
    let mut small_run = 0;
    for k in 1..200 {
        let kf = k as f64;
        let ak = alpha * kf;
        let sn = (PI * ak / 2.0).sin();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let lmag = ak * 2f64.ln() + ln_gamma((ak + df) / 2.0) + ln_gamma(ak / 2.0 + 1.0)
            - ln_gamma(kf + 1.0)
            - (df / 2.0 + 1.0) * PI.ln()
            - (ak + df) * ls;
        let term = sign * sn * lmag.exp();
        let mag = lmag.exp();
        if mag > last * 1.0001 && k > 3 {
            // asymptotic series started diverging
            return if last < 1e-12 * sum.abs() {
                Some((sum, last, big))
            } else {
                None
            };
        }
        sum += term;
        big = big.max(term.abs());
        last = mag;
        if mag < 1e-17 * sum.abs() {
            small_run += 1;
            if small_run >= 3 {
                return Some((sum, mag, big));
            }
        } else {
            small_run = 0;
        }
    }
    None
}

fn table_key(d: usize, a: f64) -> (usize, u64) {
    (d, a.to_bits())
}

pub(crate) fn stable_table(d: usize, alpha: f64) -> Arc<StableTable> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<StableTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = table_key(d, alpha);
    if let Some(t) = cache.lock().expect("table cache").get(&key) {
        return t.clone();
    }
    let t = Arc::new(StableTable::build(d, alpha));
    cache.lock().expect("table cache").entry(key).or_insert(t).clone()
}

// ---------------------------------------------------------------------------
// Resolvent kernels
// ---------------------------------------------------------------------------

/// λ-order resolvent kernel `R_λ(x, y) = ∫_0^∞ e^{-λt} p_t(x, y) dt`.
pub fn resolvent_kernel(spec: &ProcessSpec, lambda: f64, x: &[f64], y: &[f64]) -> Result<KernelValue> {
    let r = radius(spec.dim, x, y)?;
    resolvent_kernel_radial(spec, lambda, r)
}

/// Green kernel `R(x, y) = R_0(x, y)` of a transient process.
pub fn green_kernel(spec: &ProcessSpec, x: &[f64], y: &[f64]) -> Result<KernelValue> {
    resolvent_kernel(spec, 0.0, x, y)
}

fn check_order(spec: &ProcessSpec, lambda: f64) -> Result<()> {
    spec.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", "order must be finite and ≥ 0"));
    }
    if lambda == 0.0 && !spec.transient() {
        return Err(Error::Recurrent(spec.label()));
    }
    Ok(())
}

/// Resolvent kernel as a function of `r`; closed forms where available,
/// otherwise time quadrature (Brownian) or tabulated Fourier inversion.
pub fn resolvent_kernel_radial(spec: &ProcessSpec, lambda: f64, r: f64) -> Result<KernelValue> {
    check_order(spec, lambda)?;
    let d = spec.dim;
    if r == 0.0 && !matches!(spec.resolvent_singularity(), SingularOrder::Bounded) {
        return Ok(KernelValue::closed(f64::INFINITY));
    }
    match spec.kind {
        ProcessKind::Brownian => {
            if lambda == 0.0 {
                return Ok(KernelValue::closed(newton_green(d, r)));
            }
            let k = (2.0 * lambda).sqrt();
            match d {
                1 => Ok(KernelValue::closed((-k * r).exp() / k)),
                3 => Ok(KernelValue::closed((-k * r).exp() / (2.0 * PI * r))),
                _ => {
                    // R_λ(r) = λ^{d/2 - 1} R_1(√λ r)
                    let tab = resolvent_table(spec, 1.0);
                    let v = tab.eval(lambda.sqrt() * r) * lambda.powf(d as f64 / 2.0 - 1.0);
                    Ok(KernelValue {
                        value: v,
                        error_estimate: v * tab.rel_err,
                        method: Method::FourierQuadrature,
                        converged: true,
                    })
                }
            }
        }
        ProcessKind::Stable { alpha } => {
            if lambda == 0.0 {
                return Ok(KernelValue::closed(riesz_green(d, alpha, r)));
            }
            // R_λ(r) = λ^{d/α - 1} R_1(λ^{1/α} r)
            let tab = resolvent_table(spec, 1.0);
            let df = d as f64;
            let v = tab.eval(lambda.powf(1.0 / alpha) * r) * lambda.powf(df / alpha - 1.0);
            Ok(KernelValue {
                value: v,
                error_estimate: v * tab.rel_err,
                method: Method::FourierQuadrature,
                converged: true,
            })
        }
        ProcessKind::Relativistic { .. } => {
            let tab = resolvent_table(spec, lambda);
            let v = tab.eval(r);
            Ok(KernelValue {
                value: v,
                error_estimate: v * tab.rel_err,
                method: Method::FourierQuadrature,
                converged: true,
            })
        }
    }
}

/// `Γ(d/2 - 1)/(2π^{d/2}) r^{2-d}` (Brownian, d ≥ 3).
pub fn newton_green(d: usize, r: f64) -> f64 {
    let h = d as f64 / 2.0;
    gamma(h - 1.0) / (2.0 * PI.powf(h)) * r.powf(2.0 - d as f64)
}

/// Riesz kernel `Γ((d-α)/2)/(2^α π^{d/2} Γ(α/2)) r^{α-d}` (stable, d > α).
pub fn riesz_green(d: usize, alpha: f64, r: f64) -> f64 {
    let df = d as f64;
    gamma((df - alpha) / 2.0) / (2f64.powf(alpha) * PI.powf(df / 2.0) * gamma(alpha / 2.0))
        * r.powf(alpha - df)
}

/// Resolvent by direct time quadrature of the heat kernel, split at
/// `t* = r^β` with β the scaling index.
pub fn resolvent_laplace(spec: &ProcessSpec, lambda: f64, r: f64) -> Result<KernelValue> {
    check_order(spec, lambda)?;
    let d = spec.dim as f64;
    let beta = spec.index();
    let tol = Tolerance::new(1e-10, 0.0).with_max_subdivisions(2000);
    let p = |t: f64| -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let w = (-lambda * t).exp();
        if w == 0.0 {
            return 0.0;
        }
        w * heat_kernel_radial(spec, t, r).map(|k| k.value).unwrap_or(f64::NAN)
    };
    let (head, tstar) = if r > 0.0 {
        let ts = r.powf(beta);
        (quad::adaptive_with_breaks(p, 0.0, ts, &[ts * 1e-3, ts * 1e-2, ts * 0.1], tol), ts)
    } else {
        // p_t(0) ~ t^{-d/β}
        let ts = if lambda > 0.0 { 1.0 / lambda } else { 1.0 };
        (quad::power_singular_left(p, 0.0, ts, -d / beta, &[], tol), ts)
    };
    if head.value.is_infinite() {
        return Ok(KernelValue::closed(f64::INFINITY));
    }
    let mut breaks = vec![];
    if lambda > 0.0 {
        breaks.push(tstar + 1.0 / lambda);
    }
    let tail = quad::semi_infinite(p, tstar, tstar, &breaks, tol);
    Ok(KernelValue::from_quad(head + tail, 1.0, Method::LaplaceQuadrature))
}

/// Resolvent by Fourier inversion of `1/(λ + ψ)`: the first lobe by
/// adaptive quadrature, the oscillatory remainder panel by panel between
/// asymptotic zeros of `Λ_d`, summed with Wynn's ε-algorithm.
pub fn resolvent_fourier(spec: &ProcessSpec, lambda: f64, r: f64) -> Result<KernelValue> {
    check_order(spec, lambda)?;
    let d = spec.dim;
    let df = d as f64;
    let c = fourier_constant(d);
    // ρ where ψ(ρ) = λ (or 1 for λ = 0)
    let target = if lambda > 0.0 { lambda } else { 1.0 };
    let mut rho_l = 1.0;
    while spec.exponent(rho_l) < target {
        rho_l *= 2.0;
    }
    while spec.exponent(rho_l) > target && rho_l > 1e-300 {
        rho_l *= 0.5;
    }
    let f = |rho: f64| -> f64 {
        if rho == 0.0 {
            return if d == 1 && lambda > 0.0 { 1.0 / lambda } else { 0.0 };
        }
        rho.powi(d as i32 - 1) * spherical_mean(d, rho * r) / (lambda + spec.exponent(rho))
    };
    let tol = Tolerance::new(1e-11, 0.0).with_max_subdivisions(4000);
    let mut geo: Vec<f64> = (1..60).map(|k| rho_l * 0.5f64.powi(k)).collect();
    geo.push(rho_l);
    if r == 0.0 {
        if df >= spec.index() {
            return Ok(KernelValue::closed(f64::INFINITY));
        }
        let head = quad::adaptive_with_breaks(f, 0.0, rho_l, &geo, tol);
        let tail = quad::semi_infinite(f, rho_l, rho_l, &[], tol);
        return Ok(KernelValue::from_quad(head + tail, c, Method::FourierQuadrature));
    }
    let phase = (df - 1.0) * PI / 4.0 + PI / 2.0;
    let first = phase / r;
    let mut lobe_breaks: Vec<f64> = geo.into_iter().filter(|&x| x < first).collect();
    // resolve the ρ_l scale inside a long first lobe
    lobe_breaks.extend((1..8).map(|k| rho_l * 2f64.powi(k)).filter(|&x| x < first));
    let head = quad::adaptive_with_breaks(f, 0.0, first, &lobe_breaks, tol);
    let mut partial = vec![head.value];
    let mut qerr = head.error;
    let mut evals = head.evals;
    let mut acc = head.value;
    let mut best = (acc, f64::INFINITY);
    let mut k = 0usize;
    while k < 600 {
        let a = (phase + k as f64 * PI) / r;
        let b = (phase + (k + 1) as f64 * PI) / r;
        let inner: Vec<f64> = [rho_l, 2.0 * rho_l, 4.0 * rho_l]
            .into_iter()
            .filter(|&x| x > a && x < b)
            .collect();
        let q = quad::adaptive_with_breaks(f, a, b, &inner, tol);
        acc += q.value;
        qerr += q.error;
        evals += q.evals;
        partial.push(acc);
        k += 1;
        if k >= 12 && k.is_multiple_of(4) {
            let tail_start = partial.len().saturating_sub(40);
            let est = quad::wynn_epsilon(&partial[tail_start..]);
            if est.1 < best.1 {
                best = est;
            }
            if est.1 <= 1e-10 * est.0.abs() {
                break;
            }
        }
    }
    let q = QuadResult {
        value: best.0,
        error: best.1 + qerr,
        evals,
        converged: best.1 <= 1e-7 * best.0.abs(),
    };
    Ok(KernelValue::from_quad(q, c, Method::FourierQuadrature))
}

/// Tabulated λ-order kernel with declared extrapolation at both ends.
#[derive(Debug)]
pub(crate) struct ResolventTable {
    spec: ProcessSpec,
    table: LogTable,
    /// Bounded case: value at r = 0.
    r0: Option<f64>,
    tail: Tail,
    rel_err: f64,
}

#[derive(Debug, Clone, Copy)]
enum Tail {
    Power(f64),
    /// Stable-like power `near` up to `crossover`, then the far-field law.
    Crossover { near: f64, crossover: f64, far: Far },
}

#[derive(Debug, Clone, Copy)]
enum Far {
    Power(f64),
    /// `e^{-κ r} r^{-q}`.
    Exponential(f64, f64),
}

impl ResolventTable {
    fn build(spec: ProcessSpec, lambda: f64) -> Self {
        let beta = spec.index();
        let ell = if lambda > 0.0 { lambda.powf(-1.0 / beta) } else { 1.0 };
        let m = spec.mass();
        let (r_min, r_max) = match spec.kind {
            ProcessKind::Relativistic { alpha, .. } => {
                let lm = m.powf(-1.0 / alpha);
                (ell.min(lm) * 1e-4, ell.max(lm) * 60.0)
            }
            _ => (ell * 1e-4, ell * 300.0),
        };
        let per_decade = 24;
        let n = (((r_max / r_min).log10() * per_decade as f64).ceil() as usize).max(4) + 1;
        let dlx = (r_max / r_min).ln() / (n - 1) as f64;
        let mut vals = Vec::with_capacity(n);
        let mut rel_err: f64 = 0.0;
        for i in 0..n {
            let r = r_min * (dlx * i as f64).exp();
            let k = resolvent_fourier(&spec, lambda, r).expect("validated");
            let ok = k.value > 0.0 && k.error_estimate <= 1e-5 * k.value;
            // stop once cancellation has eaten the accuracy
            if !ok && i > n / 3 {
                break;
            }
            if k.value > 0.0 {
                rel_err = rel_err.max(k.error_estimate / k.value);
            }
            vals.push(k.value.max(f64::MIN_POSITIVE));
        }
        let table = LogTable::from_values(r_min, dlx, &vals);
        let tail = match spec.kind {
            ProcessKind::Stable { alpha } => Tail::Power(spec.dim as f64 + alpha),
            ProcessKind::Relativistic { alpha, m } => {
                let d = spec.dim as f64;
                let big_m = m.powf(1.0 / alpha);
                let far = if lambda == 0.0 {
                    Far::Power(d - 2.0)
                } else {
                    // pole or branch point of 1/(λ + ψ) nearest the real axis
                    let k2 = big_m * big_m - (m - lambda).max(0.0).powf(2.0 / alpha);
                    // pole: r^{-(d-1)/2}; branch point: jump-kernel profile
                    let q = if lambda < m { (d - 1.0) / 2.0 } else { (d + alpha + 1.0) / 2.0 };
                    Far::Exponential(k2.max(0.0).sqrt(), q)
                };
                Tail::Crossover {
                    near: d + alpha,
                    crossover: 1.0 / big_m,
                    far,
                }
            }
            ProcessKind::Brownian if lambda == 0.0 => Tail::Power(spec.dim as f64 - 2.0),
            ProcessKind::Brownian => Tail::Crossover {
                near: 0.0,
                crossover: 0.0,
                far: Far::Exponential((2.0 * lambda).sqrt(), (spec.dim as f64 - 1.0) / 2.0),
            },
        };
        let r0 = match spec.resolvent_singularity() {
            SingularOrder::Bounded => resolvent_fourier(&spec, lambda, 0.0).ok().map(|k| k.value),
            _ => None,
        };
        ResolventTable {
            spec,
            table,
            r0,
            tail,
            rel_err: rel_err.max(1e-8),
        }
    }

    fn eval(&self, r: f64) -> f64 {
        let rmin = self.table.x_min();
        let rmax = self.table.x_max();
        if r < rmin {
            let v1 = self.table.first();
            let d = self.spec.dim as f64;
            let beta = self.spec.index();
            return match self.spec.resolvent_singularity() {
                SingularOrder::Power { gamma } => {
                    // R_λ - R_0 is less singular than R_0
                    let g0 = |s: f64| self.leading_singular(s);
                    let _ = gamma;
                    g0(r) + (v1 - g0(rmin))
                }
                SingularOrder::Log => v1 + self.log_coefficient() * (rmin / r).ln(),
                SingularOrder::Bounded => {
                    let r0 = self.r0.unwrap_or(v1);
                    r0 - (r0 - v1) * (r / rmin).powf(beta - d)
                }
            };
        }
        if r <= rmax {
            return self.table.eval(r);
        }
        let v = self.table.last();
        match self.tail {
            Tail::Power(g) => v * (rmax / r).powf(g),
            Tail::Crossover {
                near,
                crossover,
                far,
            } => {
                let (v, r1) = if rmax < crossover {
                    let rc = crossover.min(r);
                    (v * (rmax / rc).powf(near), rc)
                } else {
                    (v, rmax)
                };
                match far {
                    Far::Power(g) => v * (r1 / r).powf(g),
                    Far::Exponential(k, q) => v * (-k * (r - r1)).exp() * (r1 / r).powf(q),
                }
            }
        }
    }

    /// Leading short-distance term, shared with the 0-order kernel.
    fn leading_singular(&self, r: f64) -> f64 {
        let d = self.spec.dim;
        match self.spec.kind {
            ProcessKind::Brownian => newton_green(d, r),
            ProcessKind::Stable { alpha } | ProcessKind::Relativistic { alpha, .. } => {
                riesz_green(d, alpha, r)
            }
        }
    }

    fn log_coefficient(&self) -> f64 {
        // d = β: d = 1, α = 1 Cauchy-type kernel: (1/π) ln(1/r)
        1.0 / PI
    }
}

pub(crate) fn resolvent_table(spec: &ProcessSpec, lambda: f64) -> Arc<ResolventTable> {
    type Key = (usize, u64, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<ResolventTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let (a, m) = match spec.kind {
        ProcessKind::Brownian => (2.0, 0.0),
        ProcessKind::Stable { alpha } => (alpha, 0.0),
        ProcessKind::Relativistic { alpha, m } => (alpha, m),
    };
    let key = (spec.dim, a.to_bits(), m.to_bits(), lambda.to_bits());
    if let Some(t) = cache.lock().expect("table cache").get(&key) {
        return t.clone();
    }
    let t = Arc::new(ResolventTable::build(*spec, lambda));
    cache.lock().expect("table cache").entry(key).or_insert(t).clone()
}

// ---------------------------------------------------------------------------
// Reference kernels and explicit Green functions
// ---------------------------------------------------------------------------

/// `G(r) = r^{β-ν}` for ν > β, `ln(1/r)` for ν = β, and `r^{β-ν}` (bounded)
/// for ν < β. The diagonal returns `+∞` whenever `G` is singular.
pub fn green_kernel_reference(nu: f64, beta: f64, x: &[f64], y: &[f64]) -> Result<KernelValue> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let r = dist2(x, y).sqrt();
    Ok(KernelValue::closed(reference_radial(nu, beta, r)))
}

pub fn reference_radial(nu: f64, beta: f64, r: f64) -> f64 {
    if nu == beta {
        if r == 0.0 {
            f64::INFINITY
        } else {
            (1.0 / r).ln()
        }
    } else if r == 0.0 && nu > beta {
        f64::INFINITY
    } else {
        r.powf(beta - nu)
    }
}

/// Green function of Brownian motion (generator ½Δ) killed on leaving
/// `(a, b)`: `2(x∧y - a)(b - x∨y)/(b - a)`.
pub fn interval_green(a: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    if !(b > a) {
        return Err(Error::param("interval", "need a < b"));
    }
    if !(x > a && x < b && y > a && y < b) {
        return Err(Error::param("x, y", "arguments must lie in (a, b)"));
    }
    Ok(2.0 * (x.min(y) - a) * (b - x.max(y)) / (b - a))
}

// ---------------------------------------------------------------------------
// Relativistic jump kernel
// ---------------------------------------------------------------------------

/// `A(d, -α) = α 2^{d+α} Γ((d+α)/2) / (2^{d+1} π^{d/2} Γ(1 - α/2))`.
pub fn jump_constant(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    alpha * 2f64.powf(df + alpha) * gamma((df + alpha) / 2.0)
        / (2f64.powf(df + 1.0) * PI.powf(df / 2.0) * gamma(1.0 - alpha / 2.0))
}

/// `J_m(x, y) = A(d, -α) Ψ(m^{1/α}|x - y|) / |x - y|^{d+α}`; `m = 0` gives the
/// stable Lévy density. `+∞` on the diagonal.
pub fn jump_kernel(alpha: f64, m: f64, d: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    let r = radius(d, x, y)?;
    jump_kernel_radial(alpha, m, d, r)
}

pub fn jump_kernel_radial(alpha: f64, m: f64, d: usize, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(m >= 0.0) {
        return Err(Error::param("m", "must be ≥ 0"));
    }
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    let shape = if m == 0.0 { 1.0 } else { psi(m.powf(1.0 / alpha) * r, d, alpha) };
    Ok(jump_constant(d, alpha) * shape / r.powf(d as f64 + alpha))
}

/// `ln I(r)` with `I(r) = ∫_0^∞ s^{ν-1} e^{-s/4 - r²/s} ds`, `ν = (d+α)/2`,
/// computed by adaptive quadrature in `u = ln s` around the peak.
pub fn psi_log_integral(r: f64, d: usize, alpha: f64) -> f64 {
    let nu = (d as f64 + alpha) / 2.0;
    let r2 = r * r;
    // stationary point of ν u - e^u/4 - r² e^{-u}
    let phi = |u: f64| nu * u - 0.25 * u.exp() - r2 * (-u).exp();
    let mut u0 = (4.0 * nu).max(1e-300).ln();
    for _ in 0..200 {
        let g = nu - 0.25 * u0.exp() + r2 * (-u0).exp();
        let h = -0.25 * u0.exp() - r2 * (-u0).exp();
        let step = g / h;
        u0 -= step.clamp(-2.0, 2.0);
        if step.abs() < 1e-14 {
            break;
        }
    }
    let peak = phi(u0);
    // width from the curvature
    let curv = (0.25 * u0.exp() + r2 * (-u0).exp()).max(1e-300);
    let w = 1.0 / curv.sqrt();
    let lo = u0 - (60.0 * w).max(60.0 / nu.max(1e-3));
    let hi = u0 + (60.0 * w).max(8.0);
    let breaks: Vec<f64> = (-6..=6).map(|k| u0 + k as f64 * w).collect();
    let q = quad::adaptive_with_breaks(
        |u| (phi(u) - peak).exp(),
        lo,
        hi,
        &breaks,
        Tolerance::new(1e-13, 0.0).with_max_subdivisions(2000),
    );
    peak + q.value.ln()
}

/// `Ψ(r) = I(r)/I(0)`, both by quadrature with the same tolerance.
pub fn psi(r: f64, d: usize, alpha: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    (psi_log_integral(r, d, alpha) - psi_log_integral(0.0, d, alpha))
        .exp()
        .min(1.0)
}

/// `Ψ''(0)` by a second difference of [`psi`]; finite only when
/// `(d + α)/2 > 1`.
pub fn psi_second_derivative_at_zero(d: usize, alpha: f64) -> f64 {
    let h = 1e-3;
    2.0 * (psi(h, d, alpha) - 1.0) / (h * h)
}

// ---------------------------------------------------------------------------
// Envelopes and on-diagonal bounds
// ---------------------------------------------------------------------------

/// `Φ^m_C(t, r)`.
pub fn envelope_phi(alpha: f64, m: f64, d: usize, t: f64, r: f64, c: f64) -> Result<f64> {
    let df = d as f64;
    if t <= 1.0 / m {
        let j = if r == 0.0 {
            f64::INFINITY
        } else {
            t * jump_kernel_radial(alpha, m, d, r)?
        };
        Ok(t.powf(-df / alpha).min(j))
    } else {
        let a = m.powf(1.0 / alpha) * r;
        let b = m.powf(2.0 / alpha - 1.0) * r * r / t;
        Ok(m.powf(df / alpha - df / 2.0) * t.powf(-df / 2.0) * (-(a.min(b)) / c).exp())
    }
}

/// `(C₂⁻¹ Φ^m_{1/C₁}, C₂ Φ^m_{C₁})` at `(t, x, y)`.
#[allow(clippy::too_many_arguments)]
pub fn heat_envelope(
    alpha: f64,
    m: f64,
    d: usize,
    t: f64,
    x: &[f64],
    y: &[f64],
    c1: f64,
    c2: f64,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if !(m > 0.0 && c1 > 0.0 && c2 > 0.0 && t > 0.0) {
        return Err(Error::param("envelope", "need m, C1, C2, t > 0"));
    }
    let r = radius(d, x, y)?;
    let lower = envelope_phi(alpha, m, d, t, r, 1.0 / c1)? / c2;
    let upper = c2 * envelope_phi(alpha, m, d, t, r, c1)?;
    Ok((lower, upper))
}

/// Fitted envelope constants for one `(d, α, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub d: usize,
    pub alpha: f64,
    pub m: f64,
    pub c1: f64,
    pub c2: f64,
}

const ENVELOPE_DATA: &str = include_str!("../data/envelope_constants.txt");

/// Parse the envelope data file: `#` comments, then whitespace-separated
/// rows `d alpha m C1 C2`.
pub fn parse_envelope_constants(text: &str) -> Result<Vec<EnvelopeConstants>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Config {
            path: format!("envelope_constants.txt:{}", i + 1),
            reason: "expected `d alpha m C1 C2`".into(),
        };
        if f.len() != 5 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        out.push(EnvelopeConstants {
            d: f[0].parse().map_err(|_| bad())?,
            alpha: num(f[1])?,
            m: num(f[2])?,
            c1: num(f[3])?,
            c2: num(f[4])?,
        });
    }
    Ok(out)
}

/// Stored constants for `(d, α, m)`, if that triple was fitted.
pub fn envelope_constants(d: usize, alpha: f64, m: f64) -> Option<EnvelopeConstants> {
    parse_envelope_constants(ENVELOPE_DATA)
        .ok()?
        .into_iter()
        .find(|c| c.d == d && c.alpha == alpha && c.m == m)
}

/// Grid on which envelope constants are fitted: `t ∈ 2^{-4..4}/m`,
/// `r ∈ {0} ∪ 2^{-3..3}·m^{-1/α}`.
pub fn envelope_grid(alpha: f64, m: f64) -> Vec<(f64, f64)> {
    let mut g = Vec::new();
    let lm = m.powf(-1.0 / alpha);
    for i in -4..=4 {
        let t = 2f64.powi(i) / m;
        g.push((t, 0.0));
        for j in -3..=3 {
            g.push((t, 2f64.powi(j) * lm));
        }
    }
    g
}

/// Smallest `C₂` (over a `C₁` scan) for which the sandwich holds on `grid`,
/// with the Fourier heat kernel as the truth.
pub fn fit_envelope_constants(spec: &ProcessSpec, grid: &[(f64, f64)]) -> Result<EnvelopeConstants> {
    let (alpha, m) = match spec.kind {
        ProcessKind::Relativistic { alpha, m } => (alpha, m),
        _ => return Err(Error::Unsupported("envelope fit needs a relativistic spec".into())),
    };
    let d = spec.dim;
    let truth: Vec<f64> = grid
        .iter()
        .map(|&(t, r)| heat_kernel_fourier(spec, t, r).value)
        .collect();
    let mut best = (f64::INFINITY, 1.0);
    for k in 0..=60 {
        let c1 = 2f64.powf(k as f64 / 10.0);
        let mut c2: f64 = 1.0;
        for (&(t, r), &p) in grid.iter().zip(&truth) {
            let up = envelope_phi(alpha, m, d, t, r, c1)?;
            let lo = envelope_phi(alpha, m, d, t, r, 1.0 / c1)?;
            c2 = c2.max(p / up).max(lo / p);
        }
        if c2 < best.0 {
            best = (c2, c1);
        }
    }
    Ok(EnvelopeConstants {
        d,
        alpha,
        m,
        c1: best.1,
        c2: best.0,
    })
}

/// Catalogued on-diagonal bound on `sup_{x,y} p_t(x, y)`: exact for Brownian
/// and stable kernels; `C₂ m^{d/α-d/2}(t^{-d/α} + t^{-d/2})` for relativistic
/// ones, with `c2` defaulting to the stored fit.
pub fn ultracontractivity_bound(spec: &ProcessSpec, t: f64, c2: Option<f64>) -> Result<f64> {
    spec.validate()?;
    if !(t > 0.0) {
        return Err(Error::param("t", "time must be positive"));
    }
    let d = spec.dim;
    let df = d as f64;
    Ok(match spec.kind {
        ProcessKind::Brownian => (2.0 * PI * t).powf(-df / 2.0),
        ProcessKind::Stable { alpha } => stable_p1_diagonal(d, alpha) * t.powf(-df / alpha),
        ProcessKind::Relativistic { alpha, m } => {
            let c = match c2 {
                Some(c) => c,
                None => envelope_constants(d, alpha, m)
                    .map(|e| e.c2)
                    .ok_or_else(|| {
                        Error::param("C2", "no stored envelope constant for this (d, α, m)")
                    })?,
            };
            c * m.powf(df / alpha - df / 2.0) * (t.powf(-df / alpha) + t.powf(-df / 2.0))
        }
    })
}

// ---------------------------------------------------------------------------
// Radial kernel handles for potentials
// ---------------------------------------------------------------------------

/// Which radial kernel a potential integrates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    /// λ-order resolvent kernel of a process (λ = 0: Green kernel).
    Resolvent { process: ProcessSpec, lambda: f64 },
    /// `|x-y|^{β-ν}` (or `ln⁺(1/|x-y|)` when ν = β) in dimension `dim`.
    Reference { dim: usize, nu: f64, beta: f64 },
}

/// Large-distance behaviour of a radial kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FarDecay {
    /// Vanishes beyond a finite radius.
    Compact,
    Exponential,
    /// `k(r) ≍ r^{-γ}`; a negative γ means growth.
    Power(f64),
}

/// Evaluable radial kernel with its declared singularity at `r = 0`.
#[derive(Debug, Clone)]
pub struct RadialKernel {
    pub spec: KernelSpec,
    dim: usize,
    singular: SingularOrder,
    scale: f64,
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    Closed,
    /// `c · R_1(a r)`.
    Scaled(Arc<ResolventTable>, f64, f64),
    Relativistic(Arc<ResolventTable>),
}

impl RadialKernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::Resolvent { process, lambda } => {
                check_order(&process, lambda)?;
                let beta = process.index();
                let scale = if lambda > 0.0 { lambda.powf(-1.0 / beta) } else { 1.0 };
                let inner = match process.kind {
                    ProcessKind::Brownian if lambda > 0.0 && !matches!(process.dim, 1 | 3) => {
                        let d = process.dim as f64;
                        Inner::Scaled(
                            resolvent_table(&process, 1.0),
                            lambda.sqrt(),
                            lambda.powf(d / 2.0 - 1.0),
                        )
                    }
                    ProcessKind::Stable { alpha } if lambda > 0.0 => {
                        let d = process.dim as f64;
                        Inner::Scaled(
                            resolvent_table(&process, 1.0),
                            lambda.powf(1.0 / alpha),
                            lambda.powf(d / alpha - 1.0),
                        )
                    }
                    ProcessKind::Relativistic { .. } => {
                        Inner::Relativistic(resolvent_table(&process, lambda))
                    }
                    _ => Inner::Closed,
                };
                Ok(RadialKernel {
                    spec,
                    dim: process.dim,
                    singular: process.resolvent_singularity(),
                    scale,
                    inner,
                })
            }
            KernelSpec::Reference { dim, nu, beta } => {
                if !(beta > 0.0) || dim == 0 {
                    return Err(Error::param("beta", "need β > 0 and d ≥ 1"));
                }
                let singular = if nu > beta {
                    SingularOrder::Power { gamma: nu - beta }
                } else if nu == beta {
                    SingularOrder::Log
                } else {
                    SingularOrder::Bounded
                };
                Ok(RadialKernel {
                    spec,
                    dim,
                    singular,
                    scale: 1.0,
                    inner: Inner::Closed,
                })
            }
        }
    }

    pub fn resolvent(process: ProcessSpec, lambda: f64) -> Result<Self> {
        RadialKernel::new(KernelSpec::Resolvent { process, lambda })
    }

    pub fn green(process: ProcessSpec) -> Result<Self> {
        RadialKernel::resolvent(process, 0.0)
    }

    /// Reference kernel with ν = d.
    pub fn reference(dim: usize, beta: f64) -> Self {
        RadialKernel::new(KernelSpec::Reference {
            dim,
            nu: dim as f64,
            beta,
        })
        .expect("valid reference kernel")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn singularity(&self) -> SingularOrder {
        self.singular
    }

    /// Length below which the kernel is in its short-distance regime.
    pub fn length_scale(&self) -> f64 {
        self.scale
    }

    /// Behaviour of the kernel as `r → ∞`.
    pub fn far_decay(&self) -> FarDecay {
        match self.spec {
            KernelSpec::Reference { nu, beta, .. } => {
                if nu == beta {
                    FarDecay::Compact
                } else {
                    FarDecay::Power(nu - beta)
                }
            }
            KernelSpec::Resolvent { process, lambda } => {
                let d = process.dim as f64;
                if lambda == 0.0 {
                    FarDecay::Power(d - process.large_scale_index())
                } else {
                    match process.kind {
                        ProcessKind::Stable { alpha } => FarDecay::Power(d + alpha),
                        _ => FarDecay::Exponential,
                    }
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self.spec {
            KernelSpec::Resolvent { process, lambda } => {
                format!("R_{lambda}[{}]", process.label())
            }
            KernelSpec::Reference { dim, nu, beta } => format!("G(d={dim},nu={nu},beta={beta})"),
        }
    }

    /// Kernel value at distance `r`; `+∞` at a singular diagonal.
    pub fn eval(&self, r: f64) -> f64 {
        match (&self.spec, &self.inner) {
            (KernelSpec::Reference { nu, beta, .. }, _) => {
                if nu == beta {
                    if r == 0.0 {
                        f64::INFINITY
                    } else {
                        (1.0 / r).ln().max(0.0)
                    }
                } else {
                    reference_radial(*nu, *beta, r)
                }
            }
            (_, Inner::Scaled(tab, a, c)) => {
                if r == 0.0 && !matches!(self.singular, SingularOrder::Bounded) {
                    f64::INFINITY
                } else {
                    c * tab.eval(a * r)
                }
            }
            (_, Inner::Relativistic(tab)) => {
                if r == 0.0 && !matches!(self.singular, SingularOrder::Bounded) {
                    f64::INFINITY
                } else {
                    tab.eval(r)
                }
            }
            (KernelSpec::Resolvent { process, lambda }, Inner::Closed) => {
                resolvent_kernel_radial(process, *lambda, r)
                    .map(|k| k.value)
                    .unwrap_or(f64::NAN)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transience_gate() {
        assert!(!ProcessSpec::brownian(2).transient());
        assert!(ProcessSpec::brownian(3).transient());
        assert!(!ProcessSpec::stable(1, 1.0).unwrap().transient());
        assert!(ProcessSpec::stable(1, 0.5).unwrap().transient());
        assert!(!ProcessSpec::relativistic(2, 1.0, 1.0).unwrap().transient());
        assert!(ProcessSpec::stable(1, 2.0).is_err());
        let r = resolvent_kernel_radial(&ProcessSpec::stable(1, 1.0).unwrap(), 0.0, 1.0);
        assert!(matches!(r, Err(Error::Recurrent(_))));
    }

    #[test]
    fn relativistic_exponent_small_argument() {
        let s = ProcessSpec::relativistic(1, 1.0, 1.0).unwrap();
        // (ρ² + 1)^{1/2} - 1 ≈ ρ²/2
        let v = s.exponent(1e-6);
        assert!((v / 5e-13 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn heat_kernel_examples() {
        let b = ProcessSpec::brownian(1);
        let v = heat_kernel(&b, 1.0, &[0.0], &[0.0]).unwrap();
        assert!((v.value - (2.0 * PI).powf(-0.5)).abs() < 1e-15);
        let c = ProcessSpec::stable(1, 1.0).unwrap();
        let v = heat_kernel(&c, 1.0, &[0.3], &[0.3]).unwrap();
        assert!((v.value - 1.0 / PI).abs() < 1e-15);
        // Fourier route agrees with the Cauchy closed form in d = 1, 2, 3
        for d in 1..=3 {
            let c = ProcessSpec::stable(d, 1.0).unwrap();
            for &r in &[0.0, 0.5, 2.0] {
                let f = heat_kernel_fourier(&c, 1.0, r);
                let e = cauchy(d, 1.0, r);
                assert!((f.value / e - 1.0).abs() < 1e-8, "d={d} r={r} {} {e}", f.value);
            }
        }
    }

    #[test]
    fn stable_table_matches_direct_fourier() {
        let s = ProcessSpec::stable(1, 1.5).unwrap();
        for &r in &[0.0, 1e-3, 0.37, 2.2, 9.0, 40.0] {
            let tab = heat_kernel_radial(&s, 1.0, r).unwrap().value;
            let dir = heat_kernel_fourier(&s, 1.0, r).value;
            assert!((tab / dir - 1.0).abs() < 1e-6, "r={r} {tab} {dir}");
        }
        let diag = heat_kernel_radial(&s, 1.0, 0.0).unwrap().value;
        assert!((diag / stable_p1_diagonal(1, 1.5) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn brownian_resolvent_routes_agree() {
        let b = ProcessSpec::brownian(1);
        for &r in &[0.0, 0.5, 1.0, 3.0] {
            let exact = (-(2f64.sqrt()) * r).exp() / 2f64.sqrt();
            let l = resolvent_laplace(&b, 1.0, r).unwrap().value;
            assert!((l / exact - 1.0).abs() < 1e-8, "r={r} {l} {exact}");
            let f = resolvent_fourier(&b, 1.0, r).unwrap().value;
            assert!((f / exact - 1.0).abs() < 1e-6, "r={r} {f} {exact}");
        }
        let b3 = ProcessSpec::brownian(3);
        for &r in &[0.5, 1.0, 2.0] {
            let l = resolvent_laplace(&b3, 0.0, r).unwrap().value;
            assert!((l * 2.0 * PI * r - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn stable_resolvent_table_matches_laplace_route() {
        let s = ProcessSpec::stable(1, 1.5).unwrap();
        for &r in &[0.0, 0.01, 0.3, 1.0, 5.0, 50.0] {
            let tab = resolvent_kernel_radial(&s, 1.0, r).unwrap().value;
            let lap = resolvent_laplace(&s, 1.0, r).unwrap().value;
            assert!((tab / lap - 1.0).abs() < 1e-4, "r={r} {tab} {lap}");
        }
        let s3 = ProcessSpec::stable(3, 1.0).unwrap();
        for &r in &[0.2, 1.0, 3.0] {
            let tab = resolvent_kernel_radial(&s3, 2.0, r).unwrap().value;
            let lap = resolvent_laplace(&s3, 2.0, r).unwrap().value;
            assert!((tab / lap - 1.0).abs() < 1e-4, "r={r} {tab} {lap}");
        }
    }

    #[test]
    fn reference_and_interval_green() {
        let g = green_kernel_reference(3.0, 2.0, &[0.0; 3], &[0.5, 0.0, 0.0]).unwrap();
        assert!((g.value - 2.0).abs() < 1e-15);
        let g = green_kernel_reference(2.0, 2.0, &[0.0; 2], &[0.1, 0.0]).unwrap();
        assert!((g.value - 10f64.ln()).abs() < 1e-15);
        assert!(green_kernel_reference(3.0, 2.0, &[0.0; 3], &[0.0; 3]).unwrap().value.is_infinite());
        assert_eq!(interval_green(0.0, 1.0, 0.5, 0.5).unwrap(), 0.5);
        assert_eq!(interval_green(0.0, 1.0, 0.25, 0.75).unwrap(), 0.125);
        assert!(interval_green(0.0, 1.0, 1e-12, 0.5).unwrap() < 1e-11);
        assert!(interval_green(0.0, 1.0, 1.5, 0.5).is_err());
    }

    #[test]
    fn jump_and_psi() {
        assert!((jump_constant(1, 1.0) - 1.0 / PI).abs() < 1e-14);
        // I(0) = 4^ν Γ(ν)
        for &(d, a) in &[(1usize, 1.0), (2, 0.5), (3, 1.5)] {
            let nu = (d as f64 + a) / 2.0;
            let i0 = psi_log_integral(0.0, d, a).exp();
            let exact = 4f64.powf(nu) * gamma(nu);
            assert!((i0 / exact - 1.0).abs() < 1e-10, "{i0} {exact}");
        }
        assert_eq!(psi(0.0, 1, 1.0), 1.0);
        assert!(psi(5.0, 1, 1.0) < psi(1.0, 1, 1.0));
        assert!(psi(1.0, 1, 1.0) < psi(0.1, 1, 1.0));
        // ν = 1 for (1,1): Ψ(r) = r K_1(r); K_1(1) = 0.6019072301972346
        assert!((psi(1.0, 1, 1.0) - 0.601_907_230_197_234_6).abs() < 1e-9);
        // Ψ''(0) = -1/(2(ν-1)) for ν > 1
        let nu: f64 = 2.0;
        let c = psi_second_derivative_at_zero(3, 1.0);
        assert!((c + 1.0 / (2.0 * (nu - 1.0))).abs() < 1e-4, "{c}");
        // m → 0 recovers the stable density
        let j = jump_kernel_radial(1.0, 1e-12, 1, 2.0).unwrap();
        assert!((j - jump_constant(1, 1.0) / 4.0).abs() < 1e-9);
    }

    #[test]
    fn envelope_branches() {
        let (lo, up) = heat_envelope(1.0, 1.0, 1, 0.5, &[0.0], &[0.0], 2.0, 3.0).unwrap();
        assert!((up - 3.0 * 0.5f64.powi(-1)).abs() < 1e-12);
        assert!((lo - 0.5f64.powi(-1) / 3.0).abs() < 1e-12);
        let (_, up) = heat_envelope(1.0, 2.0, 3, 4.0, &[0.0; 3], &[0.0; 3], 2.0, 3.0).unwrap();
        let expect = 3.0 * 2f64.powf(3.0 - 1.5) * 4f64.powf(-1.5);
        assert!((up - expect).abs() < 1e-12);
    }

    #[test]
    fn ultracontractivity_examples() {
        let b = ultracontractivity_bound(&ProcessSpec::brownian(2), 1.0, None).unwrap();
        assert!((b - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let s = ultracontractivity_bound(&ProcessSpec::stable(1, 1.0).unwrap(), 2.0, None).unwrap();
        assert!((s - 1.0 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn envelope_data_file_parses() {
        let all = parse_envelope_constants(ENVELOPE_DATA).unwrap();
        assert!(!all.is_empty());
        assert!(all.iter().all(|c| c.c1 > 0.0 && c.c2 >= 1.0));
    }
}
