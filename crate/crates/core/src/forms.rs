//! Discretised Dirichlet forms on grids: the local form `½∫|∇u|²`, the
//! relativistic stable jump form, the p-Stollmann–Voigt audit, energy-ball
//! tightness, embedding singular values and Dirichlet eigenvalues.
//!
//! Every form is stored as a weighted graph with killing,
//! `E(u, u) = ½ Σ_{edges} w_ij (u_i - u_j)² + ½ Σ_i κ_i u_i²`,
//! which makes symmetry, positivity and the Markov property structural.

use crate::error::{check_dim, Error, Result};
use crate::geometry::Domain;
use crate::kernels::{interval_green, jump_constant, jump_kernel_radial, psi_second_derivative_at_zero};
use crate::linalg::{lowest_eigenpairs, Skyline};
use crate::profile::{DecayProfile, DecisionRule, Limit, Verdict};
use crate::quad::{self, Tolerance};
use crate::special::{ball_volume, sphere_area};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FormKind {
    Local,
    Nonlocal { alpha: f64, m: f64, truncation: f64 },
}

/// Grid form with Dirichlet (zero-extension) boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteForm {
    pub dim: usize,
    pub h: f64,
    pub kind: FormKind,
    pub nodes: Vec<Vec<f64>>,
    /// Per-node quadrature weights for `L^q` norms.
    pub mass: Vec<f64>,
    /// Nodes coupled to the exterior (where `u = 0`).
    pub boundary: Vec<bool>,
    /// `(i, j, w_ij)` with `i < j`, `w_ij > 0`.
    pub edges: Vec<(usize, usize, f64)>,
    /// `κ_i ≥ 0`.
    pub killing: Vec<f64>,
}

impl DiscreteForm {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        self.bilinear(u, u)
    }

    /// `E(u, v)`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let e: f64 = self
            .edges
            .iter()
            .map(|&(i, j, w)| w * (u[i] - u[j]) * (v[i] - v[j]))
            .sum();
        let k: f64 = self.killing.iter().zip(u.iter().zip(v)).map(|(k, (a, b))| k * a * b).sum();
        0.5 * (e + k)
    }

    /// Stiffness entries of `K` with `E(u, u) = ½ uᵀ K u`.
    fn stiffness(&self) -> Vec<(usize, usize, f64)> {
        let mut diag = self.killing.clone();
        let mut out = Vec::with_capacity(self.edges.len() + self.len());
        for &(i, j, w) in &self.edges {
            diag[i] += w;
            diag[j] += w;
            out.push((j.max(i), j.min(i), -w));
        }
        out.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
        out
    }

    /// `K u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.killing.iter().zip(u).map(|(k, x)| k * x).collect();
        for &(i, j, w) in &self.edges {
            let d = w * (u[i] - u[j]);
            out[i] += d;
            out[j] -= d;
        }
        out
    }

    /// `(Σ |u_i|^q w_i)^{1/q}`.
    pub fn lq_norm(&self, u: &[f64], q: f64) -> f64 {
        weighted_norm(u, &self.mass, q)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        check_dim(self.len(), u.len())
    }

    /// `P_t u = exp(-t·½M⁻¹K) u` by dense eigendecomposition (n ≤ 3000).
    pub fn semigroup(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let n = self.len();
        if n > 3000 {
            return Err(Error::Unsupported("dense semigroup beyond 3000 nodes".into()));
        }
        if !(t >= 0.0) {
            return Err(Error::param("t", "must be ≥ 0"));
        }
        let s: Vec<f64> = self.mass.iter().map(|m| m.sqrt()).collect();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, j, v) in self.stiffness() {
            let v = 0.5 * v / (s[i] * s[j]);
            a[(i, j)] += v;
            if i != j {
                a[(j, i)] += v;
            }
        }
        let eig = SymmetricEigen::new(a);
        let y: Vec<f64> = u.iter().zip(&s).map(|(a, b)| a * b).collect();
        let mut out = vec![0.0; n];
        for k in 0..n {
            let c: f64 = (0..n).map(|r| eig.eigenvectors[(r, k)] * y[r]).sum();
            let c = c * (-t * eig.eigenvalues[k]).exp();
            for (r, o) in out.iter_mut().enumerate() {
                *o += c * eig.eigenvectors[(r, k)];
            }
        }
        Ok(out.iter().zip(&s).map(|(a, b)| a / b).collect())
    }

    /// Text dump; see `docs/form-dump.md`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = serde_json::to_string(&self.kind).expect("serialisable");
        let _ = writeln!(s, "# lpkato form dump v1");
        let _ = writeln!(s, "kind {kind}");
        let _ = writeln!(s, "dim {}", self.dim);
        let _ = writeln!(s, "h {:e}", self.h);
        let _ = writeln!(s, "nodes {}", self.len());
        for i in 0..self.len() {
            let coords: Vec<String> = self.nodes[i].iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(
                s,
                "{i} {} {:e} {} {:e}",
                coords.join(" "),
                self.mass[i],
                u8::from(self.boundary[i]),
                self.killing[i]
            );
        }
        let _ = writeln!(s, "edges {}", self.edges.len());
        for &(i, j, w) in &self.edges {
            let _ = writeln!(s, "{i} {j} {w:e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config {
            path: "form-dump".into(),
            reason: msg.to_string(),
        };
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let mut header = |key: &str| -> Result<String> {
            let l = lines.next().ok_or_else(|| bad("truncated header"))?;
            l.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| bad(&format!("expected `{key}`")))
        };
        let kind: FormKind = serde_json::from_str(&header("kind")?).map_err(|e| bad(&e.to_string()))?;
        let dim: usize = header("dim")?.parse().map_err(|_| bad("dim"))?;
        let h: f64 = header("h")?.parse().map_err(|_| bad("h"))?;
        let n: usize = header("nodes")?.parse().map_err(|_| bad("nodes"))?;
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad(&format!("number `{t}`")));
        let mut nodes = Vec::with_capacity(n);
        let mut mass = Vec::with_capacity(n);
        let mut boundary = Vec::with_capacity(n);
        let mut killing = Vec::with_capacity(n);
        for _ in 0..n {
            let l = lines.next().ok_or_else(|| bad("missing node"))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != dim + 4 {
                return Err(bad("node line width"));
            }
            nodes.push(f[1..=dim].iter().map(|t| num(t)).collect::<Result<Vec<_>>>()?);
            mass.push(num(f[dim + 1])?);
            boundary.push(f[dim + 2] == "1");
            killing.push(num(f[dim + 3])?);
        }
        let l = lines.next().ok_or_else(|| bad("missing edges"))?;
        let m: usize = l
            .strip_prefix("edges")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("edges"))?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let l = lines.next().ok_or_else(|| bad("missing edge"))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("edge line width"));
            }
            let i: usize = f[0].parse().map_err(|_| bad("edge index"))?;
            let j: usize = f[1].parse().map_err(|_| bad("edge index"))?;
            if i >= n || j >= n {
                return Err(bad("edge index out of range"));
            }
            edges.push((i, j, num(f[2])?));
        }
        Ok(DiscreteForm {
            dim,
            h,
            kind,
            nodes,
            mass,
            boundary,
            edges,
            killing,
        })
    }
}

fn weighted_norm(u: &[f64], w: &[f64], q: f64) -> f64 {
    let s: f64 = u.iter().zip(w).map(|(x, m)| x.abs().powf(q) * m).sum();
    s.powf(1.0 / q)
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

struct Grid {
    h: f64,
    lo: Vec<f64>,
    /// Integer coordinates, ordered with the longest axis slowest.
    index: Vec<Vec<i64>>,
    lookup: HashMap<Vec<i64>, usize>,
}

impl Grid {
    fn point(&self, k: &[i64]) -> Vec<f64> {
        k.iter().zip(&self.lo).map(|(&i, l)| l + i as f64 * self.h).collect()
    }
}

fn build_grid(domain: &Domain, h: f64) -> Result<Grid> {
    if !(h > 0.0) {
        return Err(Error::param("h", "must be positive"));
    }
    domain.validate()?;
    let bounds = domain.axis_bounds();
    if bounds.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::param(
            "domain",
            "unbounded; intersect with a truncation box (see `truncate`)",
        ));
    }
    let d = domain.dim;
    let lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let counts: Vec<i64> = bounds.iter().map(|(a, b)| ((b - a) / h).ceil() as i64).collect();
    let total: i64 = counts.iter().map(|c| c + 1).product();
    if total > 50_000_000 {
        return Err(Error::param("h", "grid too fine for the bounding box"));
    }
    // longest axis slowest keeps the skyline narrow
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    let mut index = Vec::new();
    let mut k = vec![1i64; d];
    'outer: loop {
        let x: Vec<f64> = k.iter().zip(&lo).map(|(&i, l)| l + i as f64 * h).collect();
        if domain.contains_unchecked(&x) {
            index.push(k.clone());
        }
        for &ax in axes.iter().rev() {
            k[ax] += 1;
            if k[ax] < counts[ax] + 1 {
                continue 'outer;
            }
            k[ax] = 1;
        }
        break;
    }
    for ax in 0..d {
        let mut vals: Vec<i64> = index.iter().map(|k| k[ax]).collect();
        vals.sort_unstable();
        vals.dedup();
        if vals.len() < 8 {
            return Err(Error::param("h", "grid too coarse: fewer than 8 interior nodes per axis"));
        }
    }
    let lookup = index.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
    Ok(Grid {
        h,
        lo,
        index,
        lookup,
    })
}

/// Lumped cell volumes: per axis, half a spacing towards interior
/// neighbours and the full boundary distance otherwise, so interior cells
/// tile the domain.
fn cell_mass(domain: &Domain, g: &Grid, nodes: &[Vec<f64>]) -> Vec<f64> {
    let h = g.h;
    g.index
        .iter()
        .zip(nodes)
        .map(|(k, x)| {
            (0..k.len())
                .map(|ax| {
                    [1i64, -1]
                        .iter()
                        .map(|&step| {
                            let mut nb = k.clone();
                            nb[ax] += step;
                            if g.lookup.contains_key(&nb) {
                                0.5 * h
                            } else {
                                domain.boundary_distance_along(x, ax, step > 0).min(h)
                            }
                        })
                        .sum::<f64>()
                })
                .product()
        })
        .collect()
}

/// Intersects an unbounded domain with a box of side `length` along its
/// unbounded axes: `(start, start + length)` for a horn axis, centred
/// `(-length/2, length/2)` otherwise.
pub fn truncate(domain: &Domain, length: f64) -> Result<Domain> {
    if !(length > 0.0) {
        return Err(Error::param("length", "must be positive"));
    }
    let b = domain.axis_bounds();
    let mut lo = Vec::with_capacity(domain.dim);
    let mut hi = Vec::with_capacity(domain.dim);
    for &(a, c) in &b {
        match (a.is_finite(), c.is_finite()) {
            (true, true) => {
                lo.push(a);
                hi.push(c);
            }
            (true, false) => {
                lo.push(a);
                hi.push(a + length);
            }
            (false, true) => {
                lo.push(c - length);
                hi.push(c);
            }
            (false, false) => {
                lo.push(-0.5 * length);
                hi.push(0.5 * length);
            }
        }
    }
    Domain::intersection(vec![domain.clone(), Domain::cube(lo, hi)?])
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// Second-order finite-difference form of `½∫|∇u|²` with zero Dirichlet data.
///
/// A link from node `x` to an exterior neighbour is shortened to the
/// boundary crossing `θh` (`θ ∈ (0, 1]`), contributing `h^{d-2}/θ` to the
/// killing; this is the symmetric second-order cut-cell stencil.
pub fn assemble_local(domain: &Domain, h: f64) -> Result<DiscreteForm> {
    let g = build_grid(domain, h)?;
    let d = domain.dim;
    let n = g.index.len();
    let nodes: Vec<Vec<f64>> = g.index.iter().map(|k| g.point(k)).collect();
    let w = h.powi(d as i32 - 2);
    let mut edges = Vec::new();
    let mut killing = vec![0.0; n];
    for (i, k) in g.index.iter().enumerate() {
        for ax in 0..d {
            for step in [1i64, -1] {
                let mut nb = k.clone();
                nb[ax] += step;
                match g.lookup.get(&nb) {
                    Some(&j) => {
                        if step == 1 {
                            edges.push((i.min(j), i.max(j), w));
                        }
                    }
                    None => {
                        let dist = domain.boundary_distance_along(&nodes[i], ax, step > 0);
                        let theta = (dist / h).clamp(1e-3, 1.0);
                        killing[i] += w / theta;
                    }
                }
            }
        }
    }
    let boundary = killing.iter().map(|&k| k > 0.0).collect();
    Ok(DiscreteForm {
        dim: d,
        h,
        kind: FormKind::Local,
        mass: cell_mass(domain, &g, &nodes),
        nodes,
        boundary,
        edges,
        killing,
    })
}

/// `½∫∫(u(x) - u(y))² J_m(x, y) dx dy` with zero extension outside the
/// domain, interactions cut at `truncation`.
///
/// Pairs at grid distance use the midpoint rule. The own-cell region
/// `|z| < ρ` (`V_d ρ^d = h^d`) is replaced by `½ c_ρ |∇u|²` with
/// `c_ρ = (1/d)∫_{|z|<ρ}|z|²J` from `Ψ(r) ≈ 1 + Ψ''(0)r²/2`, discretised
/// on nearest-neighbour links. Exterior nodes inside the cut-off and the
/// analytic tail beyond it enter as killing.
pub fn assemble_nonlocal(alpha: f64, m: f64, domain: &Domain, h: f64, truncation: f64) -> Result<DiscreteForm> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::param("alpha", "need 0 < α < 2"));
    }
    if !(m >= 0.0) {
        return Err(Error::param("m", "must be ≥ 0"));
    }
    let g = build_grid(domain, h)?;
    let d = domain.dim;
    let n = g.index.len();
    if n > 20_000 {
        return Err(Error::Unsupported("nonlocal assembly beyond 20000 nodes".into()));
    }
    let df = d as f64;
    let rho = h * (1.0 / ball_volume(d)).powf(1.0 / df);
    if !(truncation > 2.0 * h) {
        return Err(Error::param("truncation", "must exceed two grid spacings"));
    }
    let a = jump_constant(d, alpha);
    let area = sphere_area(d);
    let mscale = if m == 0.0 { 0.0 } else { m.powf(1.0 / alpha) };
    let shell = |r: f64| jump_kernel_radial(alpha, m, d, r).unwrap_or(0.0) * r.powf(df - 1.0);
    let tol = Tolerance::new(1e-9, 0.0);
    let tail = area * quad::semi_infinite(shell, truncation, truncation, &[], tol).value;
    let near = area * quad::semi_infinite(shell, rho, rho, &[], tol).value;
    if tail > 0.01 * near {
        return Err(Error::param(
            "truncation",
            format!("tail weight {:.3}% exceeds 1%", 100.0 * tail / near),
        ));
    }
    let psi2 = if m > 0.0 {
        let v = psi_second_derivative_at_zero(d, alpha);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    } else {
        0.0
    };
    let c_rho = a * area / df
        * (rho.powf(2.0 - alpha) / (2.0 - alpha)
            + 0.5 * psi2 * mscale * mscale * rho.powf(4.0 - alpha) / (4.0 - alpha));
    let hd = h.powi(d as i32);
    let mut jcache: HashMap<i64, f64> = HashMap::new();
    let mut jw = |k2: i64| -> f64 {
        *jcache
            .entry(k2)
            .or_insert_with(|| jump_kernel_radial(alpha, m, d, (k2 as f64).sqrt() * h).unwrap_or(0.0) * hd * hd)
    };
    let reach = (truncation / h).floor() as i64;
    let mut edges = Vec::new();
    let mut killing = vec![0.0; n];
    let local_w = c_rho * h.powi(d as i32 - 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let k2: i64 = g.index[i].iter().zip(&g.index[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if k2 > reach * reach {
                continue;
            }
            // both ordered pairs of the double sum
            let mut w = 2.0 * jw(k2);
            if k2 == 1 {
                w += local_w;
            }
            edges.push((i, j, w));
        }
    }
    // exterior nodes within the cut-off
    let offsets: Vec<Vec<i64>> = {
        let mut v = Vec::new();
        let mut k = vec![-reach; d];
        'o: loop {
            let k2: i64 = k.iter().map(|x| x * x).sum();
            if k2 > 0 && k2 <= reach * reach {
                v.push(k.clone());
            }
            for ax in 0..d {
                k[ax] += 1;
                if k[ax] <= reach {
                    continue 'o;
                }
                k[ax] = -reach;
            }
            break;
        }
        v
    };
    for i in 0..n {
        let mut kap = 0.0;
        for off in &offsets {
            let nb: Vec<i64> = g.index[i].iter().zip(off).map(|(a, b)| a + b).collect();
            if g.lookup.contains_key(&nb) {
                continue;
            }
            let k2: i64 = off.iter().map(|x| x * x).sum();
            kap += 2.0 * jw(k2);
            if k2 == 1 {
                kap += local_w;
            }
        }
        killing[i] = kap + 2.0 * hd * tail;
    }
    let nodes: Vec<Vec<f64>> = g.index.iter().map(|k| g.point(k)).collect();
    let boundary = (0..n)
        .map(|i| {
            (0..d).any(|ax| {
                [1i64, -1].iter().any(|s| {
                    let mut nb = g.index[i].clone();
                    nb[ax] += s;
                    !g.lookup.contains_key(&nb)
                })
            })
        })
        .collect();
    Ok(DiscreteForm {
        dim: d,
        h,
        kind: FormKind::Nonlocal { alpha, m, truncation },
        mass: cell_mass(domain, &g, &nodes),
        nodes,
        boundary,
        edges,
        killing,
    })
}

/// Plain double sum `½ Σ_{i≠j} (u_i - u_j)² J_m(x_i, x_j) w_i w_j` on given
/// nodes, with no exterior coupling.
pub fn nonlocal_on_nodes(alpha: f64, m: f64, nodes: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<DiscreteForm> {
    let n = nodes.len();
    check_dim(n, weights.len())?;
    let d = nodes.first().map_or(1, |x| x.len());
    let mut edges = Vec::new();
    for i in 0..n {
        check_dim(d, nodes[i].len())?;
        for j in (i + 1)..n {
            let r = crate::geometry::dist2(&nodes[i], &nodes[j]).sqrt();
            let w = 2.0 * jump_kernel_radial(alpha, m, d, r)? * weights[i] * weights[j];
            edges.push((i, j, w));
        }
    }
    Ok(DiscreteForm {
        dim: d,
        h: 0.0,
        kind: FormKind::Nonlocal {
            alpha,
            m,
            truncation: f64::INFINITY,
        },
        nodes,
        mass: weights,
        boundary: vec![false; n],
        edges,
        killing: vec![0.0; n],
    })
}

// ---------------------------------------------------------------------------
// Stollmann–Voigt
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvStatus {
    Checked,
    SkippedInfinitePotential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvReport {
    pub p: f64,
    /// `‖R^p μ‖_∞`.
    pub potential_norm: f64,
    /// `‖R^p μ‖^{1/p} E(u, u) - ‖u‖²_{L^{2p}(μ)}` per test function.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub status: SvStatus,
}

/// Audits `‖u‖²_{L^{2p}(μ)} ≤ ‖R^pμ‖_∞^{1/p} E(u, u)`; `mu` defaults to the
/// form's mass weights.
pub fn stollmann_voigt_check(
    form: &DiscreteForm,
    mu: Option<&[f64]>,
    p: f64,
    potential_norm: f64,
    tests: &[Vec<f64>],
) -> Result<SvReport> {
    if !(p >= 1.0) {
        return Err(Error::param("p", "need p ≥ 1"));
    }
    let mu = mu.unwrap_or(&form.mass);
    check_dim(form.len(), mu.len())?;
    if !potential_norm.is_finite() {
        return Ok(SvReport {
            p,
            potential_norm,
            margins: vec![],
            min_margin: f64::NAN,
            status: SvStatus::SkippedInfinitePotential,
        });
    }
    let c = potential_norm.powf(1.0 / p);
    let mut margins = Vec::with_capacity(tests.len());
    for u in tests {
        form.check(u)?;
        let lhs = weighted_norm(u, mu, 2.0 * p).powi(2);
        margins.push(c * form.energy(u) - lhs);
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SvReport {
        p,
        potential_norm,
        margins,
        min_margin: if tests.is_empty() { 0.0 } else { min_margin },
        status: SvStatus::Checked,
    })
}

/// `sup_x ∫_a^b G(x, y)^p dy` for the interval Green function of `½Δ`.
pub fn interval_potential_norm(a: f64, b: f64, p: f64) -> Result<f64> {
    if !(b > a) || !(p >= 1.0) {
        return Err(Error::param("interval", "need a < b and p ≥ 1"));
    }
    let tol = Tolerance::new(1e-12, 0.0);
    let pot = |x: f64| {
        let f = |y: f64| interval_green(a, b, x, y).map_or(0.0, |g| g.powf(p));
        quad::adaptive_with_breaks(f, a, b, &[x], tol).value
    };
    // symmetric and unimodal about the midpoint
    Ok(pot(0.5 * (a + b)))
}

/// `max_i Σ_j G_h(x_i, x_j)^p μ_j` with the form's own Green kernel
/// `G_h = 2K⁻¹` (entries per unit mass weight).
pub fn discrete_potential_norm(form: &DiscreteForm, p: f64, mu: Option<&[f64]>) -> Result<f64> {
    let n = form.len();
    if n > 20_000 {
        return Err(Error::Unsupported("discrete Green kernel beyond 20000 nodes".into()));
    }
    let mu = mu.unwrap_or(&form.mass);
    check_dim(n, mu.len())?;
    let chol = Skyline::from_entries(n, &form.stiffness()).cholesky()?;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            chol.solve(&mut e);
            // column j of K⁻¹ equals row j by symmetry
            e.iter().zip(mu).map(|(g, w)| (2.0 * g).max(0.0).powf(p) * w).sum::<f64>()
        })
        .collect();
    Ok(rows.into_iter().fold(0.0, f64::max))
}

/// Random test functions: half isotropic in the energy inner product,
/// half white noise.
pub fn random_test_functions(form: &DiscreteForm, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = form.len();
    let chol = Skyline::from_entries(n, &form.stiffness()).cholesky()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for c in 0..count {
        let mut z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        if c % 2 == 0 {
            chol.backward(&mut z);
        }
        out.push(z);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tightness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub p: f64,
    pub energy_bound: f64,
    pub samples: usize,
    /// `sup_u ∫_{u^{2p} ≥ L} u^{2p} dm` per level, as a profile in `L → ∞`.
    pub profile: DecayProfile,
}

fn tail_functional(u: &[f64], w: &[f64], p: f64, level: f64) -> f64 {
    u.iter()
        .zip(w)
        .map(|(x, m)| {
            let v = x.abs().powf(2.0 * p);
            if v >= level {
                v * m
            } else {
                0.0
            }
        })
        .sum()
}

/// Samples the energy ball `{E(u, u) ≤ M}` uniformly in energy
/// coordinates, then refines the best sample per level by projected
/// gradient ascent on the energy sphere.
pub fn tightness_diagnostic(
    form: &DiscreteForm,
    p: f64,
    energy_bound: f64,
    levels: &[f64],
    samples: usize,
    seed: u64,
) -> Result<TightnessReport> {
    if !(p >= 1.0) || !(energy_bound >= 0.0) {
        return Err(Error::param("p, M", "need p ≥ 1 and M ≥ 0"));
    }
    if levels.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::param("levels", "must be positive"));
    }
    let n = form.len();
    let chol = Skyline::from_entries(n, &form.stiffness()).cholesky()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let to_sphere = |u: &mut Vec<f64>| {
        let e = form.energy(u);
        let s = if e > 0.0 { (energy_bound / e).sqrt() } else { 0.0 };
        u.iter_mut().for_each(|x| *x *= s);
    };
    let mut pool = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        chol.backward(&mut z);
        to_sphere(&mut z);
        pool.push(z);
    }
    let w = &form.mass;
    let sups: Vec<f64> = levels
        .par_iter()
        .map(|&level| {
            let mut best_i = 0;
            let mut best = f64::NEG_INFINITY;
            for (i, u) in pool.iter().enumerate() {
                let v = tail_functional(u, w, p, level);
                if v > best {
                    best = v;
                    best_i = i;
                }
            }
            if energy_bound == 0.0 || pool.is_empty() {
                return best.max(0.0);
            }
            let mut u = pool[best_i].clone();
            let mut eta = 0.5;
            for _ in 0..60 {
                // the sup-norm peak drives the tail; push it up
                let g: Vec<f64> = u
                    .iter()
                    .zip(w)
                    .map(|(x, m)| {
                        let v = x.abs().powf(2.0 * p);
                        if v >= 0.5 * level {
                            2.0 * p * x.signum() * x.abs().powf(2.0 * p - 1.0) * m
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                if gn == 0.0 {
                    break;
                }
                let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                let mut trial: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a + eta * un * b / gn).collect();
                to_sphere(&mut trial);
                let v = tail_functional(&trial, w, p, level);
                if v > best {
                    best = v;
                    u = trial;
                    eta *= 1.5;
                } else {
                    eta *= 0.5;
                    if eta < 1e-6 {
                        break;
                    }
                }
            }
            best.max(0.0)
        })
        .collect();
    let profile = DecayProfile::from_points(
        format!("tightness[p={p}, M={energy_bound}]"),
        Limit::Infinity,
        levels.iter().copied().zip(sups).collect(),
        &DecisionRule::default(),
    );
    Ok(TightnessReport {
        p,
        energy_bound,
        samples,
        profile,
    })
}

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    /// Ascending eigenvalues of `½Δ` with Dirichlet data.
    Eigenvalues,
    /// Descending singular values of the embedding into `L²`.
    SingularValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralLevel {
    /// Grid spacing, or the truncation length for truncation studies.
    pub parameter: f64,
    pub nodes: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub kind: SpectrumKind,
    pub levels: Vec<SpectralLevel>,
    /// Richardson limits (≥ 3 refinement levels only).
    pub extrapolated: Option<Vec<f64>>,
    /// Observed convergence orders per index.
    pub orders: Option<Vec<f64>>,
    /// Finest two levels agree to 1% for every index.
    pub converged: bool,
    /// Compactness signature for truncation studies.
    pub verdict: Option<Verdict>,
    pub notes: Vec<String>,
}

impl SpectralReport {
    /// Best available values: extrapolated, else the finest level.
    pub fn values(&self) -> &[f64] {
        match &self.extrapolated {
            Some(v) => v,
            None => &self.levels.last().expect("non-empty").values,
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec!["k".to_string()];
        head.extend(self.levels.iter().map(|l| format!("level_{}", crate::report::fmt_sig(l.parameter))));
        if self.extrapolated.is_some() {
            head.push("extrapolated".into());
        }
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&head).map_err(io)?;
        let k = self.levels.iter().map(|l| l.values.len()).max().unwrap_or(0);
        for i in 0..k {
            let mut row = vec![(i + 1).to_string()];
            for l in &self.levels {
                row.push(l.values.get(i).map_or(String::new(), |v| crate::report::fmt_sig(*v)));
            }
            if let Some(x) = &self.extrapolated {
                row.push(crate::report::fmt_sig(x[i]));
            }
            w.write_record(&row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf8"))
    }
}

/// Lowest `k` eigenvalues `λ` of `E(u, u) = λ‖u‖²` with eigenvectors.
pub fn form_eigenpairs(form: &DiscreteForm, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (vals, vecs) = lowest_eigenpairs(form.len(), &form.stiffness(), &form.mass, k, 17)?;
    Ok((vals.into_iter().map(|v| 0.5 * v).collect(), vecs))
}

/// `σ_j = λ_j^{-1/2}`, `j ≤ k`, descending.
pub fn embedding_singular_values(form: &DiscreteForm, k: usize) -> Result<SpectralReport> {
    if k == 0 || k > form.len() {
        return Err(Error::param("k", format!("need 1 ≤ k ≤ {}", form.len())));
    }
    let (vals, _) = form_eigenpairs(form, k)?;
    Ok(SpectralReport {
        kind: SpectrumKind::SingularValues,
        levels: vec![SpectralLevel {
            parameter: form.h,
            nodes: form.len(),
            values: vals.iter().map(|l| l.powf(-0.5)).collect(),
        }],
        extrapolated: None,
        orders: None,
        converged: true,
        verdict: None,
        notes: vec![],
    })
}

/// Singular values on truncations of growing length. Stabilisation (max
/// relative change between the two longest truncations below 1%) is the
/// compactness signature `IN`; a change above 5% is `OUT`.
pub fn embedding_truncation_study(domain: &Domain, lengths: &[f64], h: f64, k: usize) -> Result<SpectralReport> {
    if lengths.len() < 2 {
        return Err(Error::param("lengths", "need at least two truncations"));
    }
    let levels: Vec<Result<SpectralLevel>> = lengths
        .par_iter()
        .map(|&len| {
            let form = assemble_local(&truncate(domain, len)?, h)?;
            let r = embedding_singular_values(&form, k.min(form.len()))?;
            Ok(SpectralLevel {
                parameter: len,
                nodes: form.len(),
                values: r.levels[0].values.clone(),
            })
        })
        .collect();
    let levels = levels.into_iter().collect::<Result<Vec<_>>>()?;
    let a = &levels[levels.len() - 2].values;
    let b = &levels[levels.len() - 1].values;
    let change = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max);
    let verdict = if change < 0.01 {
        Verdict::In
    } else if change > 0.05 {
        Verdict::Out
    } else {
        Verdict::Inconclusive
    };
    let counts: Vec<String> = levels
        .iter()
        .map(|l| {
            let half = 0.5 * l.values[0];
            format!("{}", l.values.iter().filter(|&&s| s >= half).count())
        })
        .collect();
    Ok(SpectralReport {
        kind: SpectrumKind::SingularValues,
        levels,
        extrapolated: None,
        orders: None,
        converged: true,
        verdict: Some(verdict),
        notes: vec![
            format!("max relative change between the two longest truncations {change:.4e}"),
            format!("count of σ_k ≥ σ_1/2 per truncation: {}", counts.join(", ")),
        ],
    })
}

/// Lowest `k` Dirichlet eigenvalues of `½Δ` on each grid spacing, with
/// Richardson extrapolation from the three finest levels.
pub fn dirichlet_eigenvalues(domain: &Domain, k: usize, spacings: &[f64]) -> Result<SpectralReport> {
    if spacings.is_empty() {
        return Err(Error::param("spacings", "need at least one grid spacing"));
    }
    let mut hs = spacings.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    let levels: Vec<Result<SpectralLevel>> = hs
        .par_iter()
        .map(|&h| {
            let form = assemble_local(domain, h)?;
            let (vals, _) = form_eigenpairs(&form, k)?;
            Ok(SpectralLevel {
                parameter: h,
                nodes: form.len(),
                values: vals,
            })
        })
        .collect();
    let levels = levels.into_iter().collect::<Result<Vec<_>>>()?;
    let mut notes = Vec::new();
    let nl = levels.len();
    let converged = nl >= 2 && {
        let (a, b) = (&levels[nl - 2].values, &levels[nl - 1].values);
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 0.01 * y.abs())
    };
    if !converged {
        notes.push("finest two levels differ by ≥ 1%".into());
    }
    let (mut extrapolated, mut orders) = (None, None);
    if nl >= 3 {
        let (l0, l1, l2) = (&levels[nl - 3], &levels[nl - 2], &levels[nl - 1]);
        let r1 = l0.parameter / l1.parameter;
        let r2 = l1.parameter / l2.parameter;
        if (r1 / r2 - 1.0).abs() > 1e-9 {
            notes.push("unequal refinement ratios; no extrapolation".into());
        } else {
            let mut ex = Vec::with_capacity(k);
            let mut ord = Vec::with_capacity(k);
            for i in 0..k {
                let (a, b, c) = (l0.values[i], l1.values[i], l2.values[i]);
                let q = ((a - b) / (b - c)).ln() / r1.ln();
                if q.is_finite() && (0.5..=4.0).contains(&q) {
                    ex.push(c + (c - b) / (r1.powf(q) - 1.0));
                } else {
                    notes.push(format!("index {}: order {q:.3} outside [0.5, 4]; finest value kept", i + 1));
                    ex.push(c);
                }
                ord.push(q);
            }
            extrapolated = Some(ex);
            orders = Some(ord);
        }
    }
    Ok(SpectralReport {
        kind: SpectrumKind::Eigenvalues,
        levels,
        extrapolated,
        orders,
        converged,
        verdict: None,
        notes,
    })
}

/// Unit-truncation `(-k) ∨ u ∧ k`.
pub fn truncate_values(u: &[f64], k: f64) -> Vec<f64> {
    u.iter().map(|x| x.clamp(-k, k)).collect()
}

/// Whether the form's domain has an active Dirichlet boundary.
pub fn has_dirichlet_boundary(form: &DiscreteForm) -> bool {
    form.killing.iter().any(|&k| k > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_energy_and_hat() {
        let h = 1.0 / 256.0;
        let f = assemble_local(&Domain::interval(0.0, 1.0).unwrap(), h).unwrap();
        let u: Vec<f64> = f.nodes.iter().map(|x| (PI * x[0]).sin()).collect();
        assert!((f.energy(&u) / (PI * PI / 4.0) - 1.0).abs() < 0.01);
        let mut hat = vec![0.0; f.len()];
        hat[100] = 1.0;
        assert!((f.energy(&hat) - 1.0 / h).abs() < 1e-9);
        assert!((f.total_mass() - 1.0).abs() < 0.01);
    }

    #[test]
    fn two_point_nonlocal() {
        let f = nonlocal_on_nodes(1.0, 1.0, vec![vec![0.0], vec![0.7]], vec![0.3, 0.5]).unwrap();
        let j = jump_kernel_radial(1.0, 1.0, 1, 0.7).unwrap();
        assert!((f.energy(&[1.0, 0.0]) - j * 0.15).abs() < 1e-14 * j);
    }

    #[test]
    fn interval_spectrum() {
        let f = assemble_local(&Domain::interval(0.0, 1.0).unwrap(), 1.0 / 512.0).unwrap();
        let r = embedding_singular_values(&f, 3).unwrap();
        let s1 = r.levels[0].values[0];
        assert!((s1 / (2f64.sqrt() / PI) - 1.0).abs() < 0.01);
    }

    #[test]
    fn dump_round_trip() {
        let f = assemble_local(&Domain::unit_ball(2), 0.2).unwrap();
        let g = DiscreteForm::from_text(&f.to_text()).unwrap();
        assert_eq!(f.len(), g.len());
        assert_eq!(f.edges.len(), g.edges.len());
        let u: Vec<f64> = (0..f.len()).map(|i| (i as f64).sin()).collect();
        assert!((f.energy(&u) - g.energy(&u)).abs() < 1e-12 * f.energy(&u));
    }
}
