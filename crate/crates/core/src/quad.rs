//! One-dimensional quadrature: adaptive Gauss–Kronrod with breakpoints,
//! endpoint power-singularity removal, semi-infinite ranges and
//! Gauss–Legendre rules of arbitrary order.
//!
//! Every potential integral in the crate is eventually reduced to nested
//! calls into this module, so the routines here never panic on non-finite
//! integrands: a NaN or infinite sample marks the result as not converged
//! and propagates the value.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Absolute/relative stopping rule shared by all adaptive routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-6,
            abs: 1e-12,
            max_subdivisions: 400,
        }
    }
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Self {
        Tolerance {
            rel,
            abs,
            ..Default::default()
        }
    }

    pub fn with_max_subdivisions(mut self, n: usize) -> Self {
        self.max_subdivisions = n;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

impl QuadResult {
    pub fn zero() -> Self {
        QuadResult {
            value: 0.0,
            error: 0.0,
            evals: 0,
            converged: true,
        }
    }

    pub fn infinite() -> Self {
        QuadResult {
            value: f64::INFINITY,
            error: 0.0,
            evals: 0,
            converged: true,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        QuadResult {
            value: self.value * c,
            error: self.error * c.abs(),
            ..self
        }
    }
}

impl std::ops::Add for QuadResult {
    type Output = QuadResult;
    fn add(self, o: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + o.value,
            error: self.error + o.error,
            evals: self.evals + o.evals,
            converged: self.converged && o.converged,
        }
    }
}

impl std::iter::Sum for QuadResult {
    fn sum<I: Iterator<Item = QuadResult>>(iter: I) -> Self {
        iter.fold(QuadResult::zero(), |a, b| a + b)
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single 15-point Gauss–Kronrod panel. Returns (kronrod, |kronrod - gauss|).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        resk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let val = resk * h;
    let err = ((resk - resg) * h).abs();
    (val, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive Gauss–Kronrod on `[a, b]`, pre-split at `breaks`.
pub fn adaptive_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> QuadResult {
    if !(b > a) {
        return QuadResult::zero();
    }
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a && x < b && x.is_finite())
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(b);

    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in pts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(&mut f, w[0], w[1]);
        evals += 15;
        total += v;
        total_err += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    if !total.is_finite() {
        return QuadResult {
            value: total,
            error: f64::INFINITY,
            evals,
            converged: false,
        };
    }
    let mut splits = 0;
    while total_err > tol.target(total) && splits < tol.max_subdivisions {
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // Panel can no longer be split in floating point.
            heap.push(Panel { error: 0.0, ..p });
            total_err = heap.iter().map(|q| q.error).sum();
            splits += 1;
            continue;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        evals += 30;
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.error;
        heap.push(Panel {
            a: p.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: m,
            b: p.b,
            value: v2,
            error: e2,
        });
        splits += 1;
        if !total.is_finite() {
            break;
        }
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    QuadResult {
        value,
        error,
        evals,
        converged: value.is_finite() && error <= tol.target(value),
    }
}

pub fn adaptive<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult {
    adaptive_with_breaks(f, a, b, &[], tol)
}

/// `∫_a^b f(s) ds` where `f(s) ~ (s - a)^exponent` as `s → a⁺`, `exponent > -1`.
///
/// Uses `s = a + u^m` with `m = 1/(1 + exponent)` which maps the integrand to a
/// bounded one. Breakpoints are given in the original variable.
pub fn power_singular_left<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    exponent: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> QuadResult {
    if !(b > a) {
        return QuadResult::zero();
    }
    if exponent <= -1.0 {
        return QuadResult::infinite();
    }
    if exponent >= 0.0 {
        return adaptive_with_breaks(f, a, b, breaks, tol);
    }
    let m = 1.0 / (1.0 + exponent);
    let ub = (b - a).powf(1.0 / m);
    let ubreaks: Vec<f64> = breaks
        .iter()
        .filter(|&&x| x > a && x < b)
        .map(|&x| (x - a).powf(1.0 / m))
        .collect();
    adaptive_with_breaks(
        |u| {
            if u <= 0.0 {
                return 0.0;
            }
            let s = a + u.powf(m);
            let v = f(s);
            if v == 0.0 {
                0.0
            } else {
                v * m * u.powf(m - 1.0)
            }
        },
        0.0,
        ub,
        &ubreaks,
        tol,
    )
}

/// `∫_a^∞ f(t) dt` for integrands decaying at least like a power > 1.
///
/// `[a, a + scale]` is integrated directly, the remainder through
/// `t = a + scale·e^v` in chunks until a chunk no longer contributes.
pub fn semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> QuadResult {
    let scale = if scale > 0.0 && scale.is_finite() {
        scale
    } else {
        1.0
    };
    let head_breaks: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a && x < a + scale)
        .collect();
    let mut res = adaptive_with_breaks(&mut f, a, a + scale, &head_breaks, tol);
    let mut v0 = 0.0;
    let chunk = 4.0;
    for _ in 0..200 {
        let v1 = v0 + chunk;
        let vbreaks: Vec<f64> = breaks
            .iter()
            .filter(|&&x| x > a + scale)
            .map(|&x| ((x - a) / scale).ln())
            .filter(|&v| v > v0 && v < v1)
            .collect();
        let part = adaptive_with_breaks(
            |v| {
                let e = v.exp();
                let t = a + scale * e;
                let y = f(t);
                if y == 0.0 {
                    0.0
                } else {
                    y * scale * e
                }
            },
            v0,
            v1,
            &vbreaks,
            tol,
        );
        res = res + part;
        v0 = v1;
        if !res.value.is_finite() {
            break;
        }
        let quiet = part.value.abs() <= 0.01 * tol.target(res.value);
        let beyond = breaks.iter().all(|&x| x <= a + scale * v0.exp());
        if quiet && beyond {
            return res;
        }
    }
    res.converged = false;
    res
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Wynn's ε-algorithm applied to a sequence of partial sums.
///
/// Returns the accelerated limit and the distance between the last two
/// accelerated estimates as an error proxy. Used for oscillatory tails
/// summed panel by panel.
pub fn wynn_epsilon(partial: &[f64]) -> (f64, f64) {
    let n = partial.len();
    if n < 3 {
        let v = partial.last().copied().unwrap_or(0.0);
        let e = if n == 2 { (partial[1] - partial[0]).abs() } else { f64::INFINITY };
        return (v, e);
    }
    // eps[k] holds column k of the ε-table along the current diagonal.
    let mut prev2: Vec<f64> = vec![0.0; n + 1];
    let mut prev: Vec<f64> = partial.to_vec();
    let mut best = partial[n - 1];
    let mut best_err = (partial[n - 1] - partial[n - 2]).abs();
    let mut col = 1;
    while prev.len() > 1 {
        let mut next = Vec::with_capacity(prev.len() - 1);
        for i in 0..prev.len() - 1 {
            let diff = prev[i + 1] - prev[i];
            let base = if col == 1 { 0.0 } else { prev2[i + 1] };
            if diff == 0.0 || !diff.is_finite() {
                next.push(f64::INFINITY);
            } else {
                next.push(base + 1.0 / diff);
            }
        }
        if col % 2 == 0 && next.len() >= 2 {
            let a = next[next.len() - 1];
            let b = next[next.len() - 2];
            if a.is_finite() && b.is_finite() {
                let e = (a - b).abs();
                if e < best_err {
                    best_err = e;
                    best = a;
                }
            }
        }
        prev2 = prev;
        prev = next;
        col += 1;
    }
    (best, best_err)
}

/// Fixed-order Gauss–Legendre on `[a, b]`.
pub fn fixed_gl<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(&x, &w)| w * f(c + h * x))
        .sum::<f64>()
        * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wynn_sums_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut partial = Vec::new();
        let mut acc = 0.0;
        for k in 1..=20 {
            acc += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            partial.push(acc);
        }
        let (v, e) = wynn_epsilon(&partial);
        assert!((v - 2f64.ln()).abs() < 1e-12, "{v} {e}");
        assert!(e < 1e-9);
    }

    #[test]
    fn polynomial_exact() {
        let r = adaptive(|x| 3.0 * x * x, 0.0, 2.0, Tolerance::default());
        assert!((r.value - 8.0).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let r = power_singular_left(|x| x.powf(-0.5), 0.0, 1.0, -0.5, &[], Tolerance::new(1e-10, 0.0));
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn strong_singularity_near_threshold() {
        // ∫_0^1 s^{-0.95} ds = 20
        let r = power_singular_left(|x| x.powf(-0.95), 0.0, 1.0, -0.95, &[], Tolerance::new(1e-10, 0.0));
        assert!((r.value - 20.0).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn divergent_exponent_is_infinite() {
        let r = power_singular_left(|x| 1.0 / x, 0.0, 1.0, -1.0, &[], Tolerance::default());
        assert!(r.value.is_infinite());
    }

    #[test]
    fn semi_infinite_power_and_exp() {
        let r = semi_infinite(|t| (-t).exp(), 0.0, 1.0, &[], Tolerance::new(1e-10, 0.0));
        assert!((r.value - 1.0).abs() < 1e-9);
        let r = semi_infinite(|t| 1.0 / (t * t), 1.0, 1.0, &[], Tolerance::new(1e-9, 0.0));
        assert!((r.value - 1.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(2)).sum();
            if n >= 2 {
                assert!((s - 2.0 / 3.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn breakpoints_help_kinks() {
        let r = adaptive_with_breaks(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], Tolerance::new(1e-12, 0.0));
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-13);
    }
}
