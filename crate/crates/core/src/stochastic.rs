//! Path sampling for Brownian motion and (relativistic) stable processes,
//! exit times, Feynman–Kac semigroups, decay rates and lifetime tails.
//!
//! Paths run in batches of [`BATCH`] with one ChaCha8 stream per batch, and
//! batch results are reduced in batch order, so estimates depend only on the
//! seed and never on the number of worker threads.

use crate::error::{check_dim, Error, Result};
use crate::geometry::{dist2, Domain, DomainKind, MeasureSpec};
use crate::kernels::{ProcessKind, ProcessSpec};
use crate::special::ball_volume;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Paths per batch (and per rng stream).
pub const BATCH: usize = 1024;

/// Two-sided normal quantile used by [`MCEstimate::interval`] by default.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub spec: ProcessSpec,
    pub dt: f64,
    /// Simulation cap; exit times beyond it are censored.
    pub horizon: f64,
    /// Killing on exit, when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    pub seed: u64,
    pub paths: usize,
}

impl PathConfig {
    pub fn new(spec: ProcessSpec, dt: f64, horizon: f64, seed: u64, paths: usize) -> Self {
        PathConfig {
            spec,
            dt,
            horizon,
            domain: None,
            seed,
            paths,
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.dt > 0.0) || !(self.dt <= self.horizon) || !self.horizon.is_finite() {
            return Err(Error::param("dt", "need 0 < dt ≤ horizon < ∞"));
        }
        if self.paths == 0 {
            return Err(Error::param("paths", "need at least one path"));
        }
        if let Some(d) = &self.domain {
            check_dim(self.spec.dim, d.dim)?;
            d.validate()?;
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        check_dim(self.spec.dim, x.len())
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub se: f64,
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
    /// Time-discretisation bias order and caveats.
    pub bias_note: String,
    /// Paths that hit the horizon; the value is then a lower bound.
    #[serde(default)]
    pub censored: usize,
}

impl MCEstimate {
    /// `value ± z·se`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.value - z * self.se, self.value + z * self.se)
    }

    pub const CSV_HEADER: &'static str = "estimate,se,n,dt,seed,bias_note";

    pub fn csv_row(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record([
            crate::report::fmt_sig(self.value),
            crate::report::fmt_sig(self.se),
            self.n.to_string(),
            crate::report::fmt_sig(self.dt),
            self.seed.to_string(),
            self.bias_note.clone(),
        ])
        .expect("in-memory write");
        let bytes = w.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("utf8").trim_end().to_string()
    }
}

// ---------------------------------------------------------------------------
// Increments
// ---------------------------------------------------------------------------

/// Positive `β`-stable variate with `E e^{-λS} = e^{-λ^β}` (Kanter).
pub fn positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u: f64 = PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    let a = (beta * u).sin() / u.sin().powf(1.0 / beta);
    a * ((1.0 - beta) * u).sin().powf((1.0 - beta) / beta) / e.powf((1.0 - beta) / beta)
}

/// Subordinator increment over `dt`: `E e^{-λS} = e^{-dt((λ + m^{2/α})^{α/2} - m)}`
/// (`m = 0` for the stable case). Tempering is exact rejection with
/// acceptance `e^{-m^{2/α}s}`; steps with `m·dt > 1` are split so the
/// acceptance rate stays above `e^{-1}`.
pub fn subordinator_increment<R: Rng + ?Sized>(alpha: f64, m: f64, dt: f64, rng: &mut R) -> f64 {
    let beta = 0.5 * alpha;
    let scale = |h: f64| h.powf(1.0 / beta);
    if m == 0.0 {
        return scale(dt) * positive_stable(beta, rng);
    }
    let mu = m.powf(2.0 / alpha);
    let pieces = (m * dt).ceil().max(1.0) as usize;
    let h = dt / pieces as f64;
    let mut total = 0.0;
    for _ in 0..pieces {
        loop {
            let s = scale(h) * positive_stable(beta, rng);
            if rng.random::<f64>() < (-mu * s).exp() {
                total += s;
                break;
            }
        }
    }
    total
}

/// Displacement over `dt`: Gaussian with covariance `dt·I` for Brownian
/// motion, `W_{S_dt}` with `W` of covariance `2s·I` for the subordinated kinds.
pub fn sample_increment<R: Rng + ?Sized>(spec: &ProcessSpec, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let mut x = vec![0.0; spec.dim];
    step(spec, dt, rng, &mut x);
    Ok(x)
}

fn step<R: Rng + ?Sized>(spec: &ProcessSpec, dt: f64, rng: &mut R, x: &mut [f64]) {
    let sd = match spec.kind {
        ProcessKind::Brownian => dt.sqrt(),
        ProcessKind::Stable { alpha } => (2.0 * subordinator_increment(alpha, 0.0, dt, rng)).sqrt(),
        ProcessKind::Relativistic { alpha, m } => (2.0 * subordinator_increment(alpha, m, dt, rng)).sqrt(),
    };
    for v in x.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += sd * z;
    }
}

fn is_brownian(spec: &ProcessSpec) -> bool {
    matches!(spec.kind, ProcessKind::Brownian)
}

// ---------------------------------------------------------------------------
// Batch engine
// ---------------------------------------------------------------------------

fn stream(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(batch as u64);
    r
}

/// Runs `f(rng, count)` per batch and returns batch results in order.
fn batches<T: Send, F>(paths: usize, seed: u64, f: F) -> Vec<T>
where
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let nb = paths.div_ceil(BATCH);
    (0..nb)
        .into_par_iter()
        .map(|b| {
            let count = BATCH.min(paths - b * BATCH);
            f(&mut stream(seed, b), count)
        })
        .collect()
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: usize,
    sum: f64,
    sum2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum2 += v * v;
    }

    fn merge(self, o: Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum2: self.sum2 + o.sum2,
        }
    }

    fn mean_se(&self) -> (f64, f64) {
        let n = self.n as f64;
        let mean = self.sum / n;
        if self.n < 2 {
            return (mean, f64::INFINITY);
        }
        let var = ((self.sum2 - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }
}

/// Distance from an interior point to `∂D` (an upper bound for shapes
/// without a closed form).
pub fn boundary_distance(domain: &Domain, x: &[f64]) -> f64 {
    match &domain.kind {
        DomainKind::FullSpace => f64::INFINITY,
        DomainKind::Ball { center, radius } => (radius - dist2(x, center).sqrt()).abs(),
        DomainKind::Exterior { center, radius } => (dist2(x, center).sqrt() - radius).abs(),
        DomainKind::Box { lo, hi } => x
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(v, (a, b))| (v - a).abs().min((b - v).abs()))
            .fold(f64::INFINITY, f64::min),
        DomainKind::Strip { axis, width } => (0.5 * width - x[*axis].abs()).abs(),
        DomainKind::Intersection { parts } => parts
            .iter()
            .map(|p| boundary_distance(p, x))
            .fold(f64::INFINITY, f64::min),
        _ => (0..domain.dim)
            .flat_map(|ax| {
                [true, false]
                    .into_iter()
                    .map(move |s| domain.boundary_distance_along(x, ax, s))
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Probability that a Brownian bridge of variance `dt` between interior
/// points at boundary distances `a`, `b` crosses the (locally flat) boundary.
fn bridge_crossing(a: f64, b: f64, dt: f64) -> f64 {
    if a.is_infinite() || b.is_infinite() {
        return 0.0;
    }
    (-2.0 * a * b / dt).exp()
}

// ---------------------------------------------------------------------------
// Exit times
// ---------------------------------------------------------------------------

const BRIDGE_NOTE: &str = "O(dt) with Brownian-bridge crossing correction (half-step exit time)";
const JUMP_NOTE: &str = "exit at first step landing outside D; O(dt^{1/alpha}) overshoot bias";

/// `E_{x0}[τ_D]` by Euler paths; Brownian steps test bridge crossings
/// between grid times.
pub fn exit_time_estimate(cfg: &PathConfig, x0: &[f64]) -> Result<MCEstimate> {
    cfg.validate()?;
    cfg.check_point(x0)?;
    let domain = cfg
        .domain
        .as_ref()
        .ok_or_else(|| Error::param("domain", "exit times need a domain"))?;
    if !domain.contains_unchecked(x0) {
        return Err(Error::param("x0", "must lie in D"));
    }
    let brownian = is_brownian(&cfg.spec);
    let max_steps = (cfg.horizon / cfg.dt).ceil() as usize;
    let res: Vec<(Moments, usize)> = batches(cfg.paths, cfg.seed, |rng, count| {
        let mut m = Moments::default();
        let mut censored = 0;
        let mut x = vec![0.0; x0.len()];
        for _ in 0..count {
            x.copy_from_slice(x0);
            let mut dist = if brownian { boundary_distance(domain, &x) } else { 0.0 };
            let mut tau = None;
            for k in 0..max_steps {
                step(&cfg.spec, cfg.dt, rng, &mut x);
                let t = k as f64 * cfg.dt;
                if !domain.contains_unchecked(&x) {
                    tau = Some(t + if brownian { 0.5 * cfg.dt } else { cfg.dt });
                    break;
                }
                if brownian {
                    let nd = boundary_distance(domain, &x);
                    if rng.random::<f64>() < bridge_crossing(dist, nd, cfg.dt) {
                        tau = Some(t + 0.5 * cfg.dt);
                        break;
                    }
                    dist = nd;
                }
            }
            match tau {
                Some(t) => m.push(t),
                None => {
                    censored += 1;
                    m.push(cfg.horizon);
                }
            }
        }
        (m, censored)
    });
    let (m, censored) = res
        .into_iter()
        .fold((Moments::default(), 0), |(a, c), (b, d)| (a.merge(b), c + d));
    let (value, se) = m.mean_se();
    let mut note = if brownian { BRIDGE_NOTE } else { JUMP_NOTE }.to_string();
    if censored > 0 {
        note.push_str("; censored at horizon: lower bound");
    }
    Ok(MCEstimate {
        value,
        se,
        n: m.n,
        dt: cfg.dt,
        seed: cfg.seed,
        bias_note: note,
        censored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenBoundedProbe {
    pub points: Vec<Vec<f64>>,
    pub estimates: Vec<MCEstimate>,
    pub sup: f64,
    pub argmax: Vec<f64>,
    /// `(d+2)/(2πd)·((d+2)/2)^{2/d}·m(D)^{2/d}` for Brownian motion in
    /// `d ≥ 2` with finite volume.
    pub volume_cap: Option<f64>,
    pub notes: Vec<String>,
}

/// `sup_x E_x[τ_D]` over a probe grid, with the isoperimetric volume cap.
pub fn green_bounded_probe(cfg: &PathConfig, points: &[Vec<f64>]) -> Result<GreenBoundedProbe> {
    cfg.validate()?;
    let domain = cfg
        .domain
        .clone()
        .ok_or_else(|| Error::param("domain", "probe needs a domain"))?;
    if points.is_empty() {
        return Err(Error::param("points", "need at least one probe point"));
    }
    let mut notes = Vec::new();
    let mut estimates = Vec::with_capacity(points.len());
    for (i, x) in points.iter().enumerate() {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(i as u64);
        estimates.push(exit_time_estimate(&c, x)?);
    }
    let (k, sup) = estimates
        .iter()
        .enumerate()
        .map(|(i, e)| (i, e.value))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let d = cfg.spec.dim;
    let volume_cap = if !is_brownian(&cfg.spec) {
        notes.push("volume cap stated for Brownian motion only".into());
        None
    } else if d < 2 {
        notes.push("volume cap not asserted for d = 1".into());
        None
    } else {
        let vol = domain_volume(&domain);
        if vol.is_finite() {
            let df = d as f64;
            Some((df + 2.0) / (2.0 * PI * df) * ((df + 2.0) / 2.0).powf(2.0 / df) * vol.powf(2.0 / df))
        } else {
            notes.push("infinite volume: cap skipped".into());
            None
        }
    };
    Ok(GreenBoundedProbe {
        points: points.to_vec(),
        estimates,
        sup,
        argmax: points[k].clone(),
        volume_cap,
        notes,
    })
}

fn domain_volume(domain: &Domain) -> f64 {
    match &domain.kind {
        DomainKind::Ball { radius, .. } => ball_volume(domain.dim) * radius.powi(domain.dim as i32),
        DomainKind::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
        _ if !domain.bounded() => f64::INFINITY,
        _ => MeasureSpec::lebesgue(domain.clone()).total_mass(),
    }
}

// ---------------------------------------------------------------------------
// Feynman–Kac
// ---------------------------------------------------------------------------

/// Potentials with a closed form, for configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Potential {
    Zero,
    Constant { value: f64 },
    /// `coef·|x|²`.
    Quadratic { coef: f64 },
}

impl Potential {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Constant { value } => value,
            Potential::Quadratic { coef } => coef * x.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Potential::Zero => true,
            Potential::Constant { value } => value >= 0.0,
            Potential::Quadratic { coef } => coef >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("V", "potential must be ≥ 0"))
        }
    }
}

const FK_NOTE: &str = "trapezoid in time, O(dt^2) for smooth V";

/// `E_x[e^{-∫_0^t V(X_s)ds} f(X_t); t < τ_D]` at each time of `times`
/// (ascending), sharing paths across times.
pub fn feynman_kac_ladder<V, F>(cfg: &PathConfig, v: V, f: F, times: &[f64], x: &[f64]) -> Result<Vec<MCEstimate>>
where
    V: Fn(&[f64]) -> f64 + Sync,
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    cfg.check_point(x)?;
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
        return Err(Error::param("times", "need positive ascending times"));
    }
    let steps: Vec<usize> = times.iter().map(|t| (t / cfg.dt).round().max(1.0) as usize).collect();
    let total = *steps.last().expect("non-empty");
    let domain = cfg.domain.as_ref();
    if domain.is_some_and(|d| !d.contains_unchecked(x)) {
        return Ok(times
            .iter()
            .map(|_| MCEstimate {
                value: 0.0,
                se: 0.0,
                n: cfg.paths,
                dt: cfg.dt,
                seed: cfg.seed,
                bias_note: "start outside D".into(),
                censored: 0,
            })
            .collect());
    }
    let brownian = is_brownian(&cfg.spec);
    let dt = cfg.dt;
    let res: Vec<Vec<Moments>> = batches(cfg.paths, cfg.seed, |rng, count| {
        let mut ms = vec![Moments::default(); times.len()];
        let mut y = vec![0.0; x.len()];
        for _ in 0..count {
            y.copy_from_slice(x);
            let mut integral = 0.0;
            let mut survive = 1.0;
            let mut v_prev = v(&y);
            let mut dist = match domain {
                Some(d) if brownian => boundary_distance(d, &y),
                _ => f64::INFINITY,
            };
            let mut next = 0;
            for k in 1..=total {
                if survive > 0.0 {
                    step(&cfg.spec, dt, rng, &mut y);
                    if let Some(d) = domain {
                        if !d.contains_unchecked(&y) {
                            survive = 0.0;
                        } else if brownian {
                            let nd = boundary_distance(d, &y);
                            survive *= 1.0 - bridge_crossing(dist, nd, dt);
                            dist = nd;
                        }
                    }
                    let v_now = v(&y);
                    integral += 0.5 * dt * (v_prev + v_now);
                    v_prev = v_now;
                }
                while next < steps.len() && steps[next] == k {
                    let w = if survive > 0.0 {
                        survive * (-integral).exp() * f(&y)
                    } else {
                        0.0
                    };
                    ms[next].push(w);
                    next += 1;
                }
            }
        }
        ms
    });
    let mut acc = vec![Moments::default(); times.len()];
    for b in res {
        for (a, m) in acc.iter_mut().zip(b) {
            *a = a.merge(m);
        }
    }
    Ok(acc
        .into_iter()
        .map(|m| {
            let (value, se) = m.mean_se();
            MCEstimate {
                value,
                se,
                n: m.n,
                dt,
                seed: cfg.seed,
                bias_note: FK_NOTE.into(),
                censored: 0,
            }
        })
        .collect())
}

/// `P_t^{-V} f(x)`.
pub fn feynman_kac<V, F>(cfg: &PathConfig, v: V, f: F, t: f64, x: &[f64]) -> Result<MCEstimate>
where
    V: Fn(&[f64]) -> f64 + Sync,
    F: Fn(&[f64]) -> f64 + Sync,
{
    Ok(feynman_kac_ladder(cfg, v, f, &[t], x)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRate {
    pub lambda0: f64,
    pub se: f64,
    /// Times actually used (after dropping nonpositive estimates).
    pub times: Vec<f64>,
    pub estimates: Vec<MCEstimate>,
    pub notes: Vec<String>,
}

/// Least-squares slope of `-ln P_t^{-V}f(x)` in `t`, averaged over the
/// start points; the standard error comes from independent path batches.
pub fn fk_decay_rate<V, F>(cfg: &PathConfig, v: V, f: F, times: &[f64], points: &[Vec<f64>]) -> Result<DecayRate>
where
    V: Fn(&[f64]) -> f64 + Sync,
    F: Fn(&[f64]) -> f64 + Sync,
{
    if times.len() < 2 {
        return Err(Error::param("times", "need at least two times"));
    }
    if points.is_empty() {
        return Err(Error::param("points", "need at least one start point"));
    }
    const GROUPS: usize = 16;
    let mut notes = Vec::new();
    let mut rates = Vec::new();
    let mut group_rates: Vec<Vec<f64>> = vec![Vec::new(); GROUPS];
    let mut used_times = times.to_vec();
    let mut all = Vec::new();
    for (pi, x) in points.iter().enumerate() {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(1000 * pi as u64);
        let est = feynman_kac_ladder(&c, &v, &f, times, x)?;
        let keep = est.iter().take_while(|e| e.value > 0.0).count();
        if keep < 2 {
            return Err(Error::param("times", "estimates vanish before two ladder times"));
        }
        if keep < times.len() {
            notes.push(format!("point {pi}: ladder truncated to {keep} times"));
            used_times.truncate(keep.min(used_times.len()));
        }
        rates.push(slope(&times[..keep], &est[..keep].iter().map(|e| e.value).collect::<Vec<_>>()));
        // independent sub-runs for the standard error
        let per = (cfg.paths / GROUPS).max(1);
        for (g, gr) in group_rates.iter_mut().enumerate() {
            let mut gc = c.clone();
            gc.paths = per;
            gc.seed = c.seed.wrapping_add(1 + g as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let ge = feynman_kac_ladder(&gc, &v, &f, &times[..keep], x)?;
            if ge.iter().all(|e| e.value > 0.0) {
                gr.push(slope(&times[..keep], &ge.iter().map(|e| e.value).collect::<Vec<_>>()));
            }
        }
        all.extend(est);
    }
    let lambda0 = rates.iter().sum::<f64>() / rates.len() as f64;
    let gs: Vec<f64> = group_rates
        .iter()
        .filter(|g| g.len() == points.len())
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect();
    let se = if gs.len() >= 2 {
        let mean = gs.iter().sum::<f64>() / gs.len() as f64;
        let var = gs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (gs.len() - 1) as f64;
        // each group holds 1/GROUPS of the paths
        (var / gs.len() as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(DecayRate {
        lambda0,
        se,
        times: used_times,
        estimates: all,
        notes,
    })
}

fn slope(t: &[f64], v: &[f64]) -> f64 {
    let y: Vec<f64> = v.iter().map(|x| -x.ln()).collect();
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(&y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeTail {
    pub t: f64,
    /// `P_x(ζ ≤ t)` per probe point.
    pub estimates: Vec<MCEstimate>,
    pub sup: f64,
    pub argmax: Vec<f64>,
}

/// `sup_x P_x(ζ ≤ t)` over probe points, killing by exit from the
/// configured domain and at rate `V`.
pub fn lifetime_tail<V>(cfg: &PathConfig, v: V, t: f64, points: &[Vec<f64>]) -> Result<LifetimeTail>
where
    V: Fn(&[f64]) -> f64 + Sync,
{
    if points.is_empty() {
        return Err(Error::param("points", "need at least one probe point"));
    }
    let mut estimates = Vec::with_capacity(points.len());
    for (i, x) in points.iter().enumerate() {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(i as u64);
        c.horizon = c.horizon.max(t);
        let e = feynman_kac(&c, &v, |_| 1.0, t, x)?;
        estimates.push(MCEstimate {
            value: 1.0 - e.value,
            ..e
        });
    }
    let (k, sup) = estimates
        .iter()
        .enumerate()
        .map(|(i, e)| (i, e.value))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    Ok(LifetimeTail {
        t,
        estimates,
        sup,
        argmax: points[k].clone(),
    })
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

/// One path on the time grid up to `t` or exit; rows `(t, x)`.
pub fn sample_path(cfg: &PathConfig, x0: &[f64], t: f64, stream_id: u64) -> Result<Vec<(f64, Vec<f64>)>> {
    cfg.validate()?;
    cfg.check_point(x0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream_id);
    let n = (t / cfg.dt).round() as usize;
    let mut x = x0.to_vec();
    let mut out = vec![(0.0, x.clone())];
    for k in 1..=n {
        step(&cfg.spec, cfg.dt, &mut rng, &mut x);
        out.push((k as f64 * cfg.dt, x.clone()));
        if cfg.domain.as_ref().is_some_and(|d| !d.contains_unchecked(&x)) {
            break;
        }
    }
    Ok(out)
}

/// Plain-text trace; see `docs/path-trace.md`.
pub fn trace_text(cfg: &PathConfig, path: &[(f64, Vec<f64>)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# lpkato path trace v1");
    let _ = writeln!(s, "# process {}", cfg.spec.label());
    let _ = writeln!(s, "# dt {:e} seed {}", cfg.dt, cfg.seed);
    for (t, x) in path {
        let inside = cfg.domain.as_ref().is_none_or(|d| d.contains_unchecked(x));
        let xs: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{t:e} {} {}", xs.join(" "), u8::from(inside));
    }
    s
}

/// Parses a trace back into `(t, x, inside)` rows.
pub fn parse_trace(text: &str) -> Result<Vec<(f64, Vec<f64>, bool)>> {
    let bad = |m: &str| Error::Config {
        path: "trace".into(),
        reason: m.into(),
    };
    let mut out = Vec::new();
    for l in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() < 3 {
            return Err(bad("row too short"));
        }
        let nums = f[..f.len() - 1]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| bad("number")))
            .collect::<Result<Vec<_>>>()?;
        out.push((nums[0], nums[1..].to_vec(), f[f.len() - 1] == "1"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_potential_is_deterministic() {
        let cfg = PathConfig::new(ProcessSpec::brownian(1), 1e-2, 2.0, 1, 2000);
        let e = feynman_kac(&cfg, |_| 0.7, |_| 1.0, 2.0, &[0.0]).unwrap();
        assert!((e.value - (-1.4f64).exp()).abs() < 1e-12);
        assert!(e.se < 1e-12);
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let cfg = PathConfig::new(ProcessSpec::stable(1, 1.5).unwrap(), 1e-2, 5.0, 9, 3000)
            .with_domain(Domain::interval(-1.0, 1.0).unwrap());
        let a = exit_time_estimate(&cfg, &[0.0]).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| exit_time_estimate(&cfg, &[0.0]).unwrap());
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn trace_round_trip() {
        let cfg = PathConfig::new(ProcessSpec::brownian(2), 0.1, 1.0, 3, 1);
        let p = sample_path(&cfg, &[0.0, 0.0], 1.0, 0).unwrap();
        let back = parse_trace(&trace_text(&cfg, &p)).unwrap();
        assert_eq!(back.len(), p.len());
        assert_eq!(back[3].1, p[3].1);
    }
}
