//! Skyline Cholesky and shift-invert Lanczos for `K u = λ M u` with `K`
//! sparse symmetric positive definite and `M` diagonal positive.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Lower triangle in skyline (variable band) storage: row `i` holds
/// columns `first[i]..=i`.
#[derive(Debug, Clone)]
pub(crate) struct Skyline {
    first: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Skyline {
    /// Symmetric matrix from `(i, j, v)` entries; both `(i, j)` and `(j, i)`
    /// may be given, they are summed into the lower triangle.
    pub fn from_entries(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in entries {
            let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
            first[hi] = first[hi].min(lo);
        }
        let rows = (0..n).map(|i| vec![0.0; i - first[i] + 1]).collect();
        let mut s = Skyline { first, rows };
        for &(i, j, v) in entries {
            let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
            s.rows[hi][lo - s.first[hi]] += v;
        }
        s
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// In-place `K = L Lᵀ`.
    pub fn cholesky(mut self) -> Result<Cholesky> {
        let n = self.n();
        for i in 0..n {
            let fi = self.first[i];
            for j in fi..=i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let mut s = self.rows[i][j - fi];
                if k0 < j {
                    let (ri, rj) = if j < i {
                        let (a, b) = self.rows.split_at(i);
                        (&b[0][k0 - fi..j - fi], &a[j][k0 - fj..j - fj])
                    } else {
                        (&self.rows[i][k0 - fi..j - fi], &self.rows[i][k0 - fi..j - fi])
                    };
                    s -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                }
                if j < i {
                    let d = *self.rows[j].last().expect("diagonal");
                    self.rows[i][j - fi] = s / d;
                } else {
                    if !(s > 0.0) {
                        return Err(Error::param(
                            "form",
                            "stiffness matrix is not positive definite (no active Dirichlet boundary?)",
                        ));
                    }
                    self.rows[i][j - fi] = s.sqrt();
                }
            }
        }
        Ok(Cholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    l: Skyline,
}

impl Cholesky {
    pub fn n(&self) -> usize {
        self.l.n()
    }

    /// Solves `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        for i in 0..self.n() {
            let fi = self.l.first[i];
            let row = &self.l.rows[i];
            let s: f64 = row[..row.len() - 1].iter().zip(&b[fi..i]).map(|(a, c)| a * c).sum();
            b[i] = (b[i] - s) / row[row.len() - 1];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward(&self, y: &mut [f64]) {
        for i in (0..self.n()).rev() {
            let fi = self.l.first[i];
            let row = &self.l.rows[i];
            y[i] /= row[row.len() - 1];
            let xi = y[i];
            for (k, a) in row[..row.len() - 1].iter().enumerate() {
                y[fi + k] -= a * xi;
            }
        }
    }

    pub fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lowest `k` eigenpairs of `K u = λ M u`; eigenvectors are `M`-orthonormal.
pub(crate) fn lowest_eigenpairs(
    n: usize,
    entries: &[(usize, usize, f64)],
    mass: &[f64],
    k: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if k == 0 || k > n {
        return Err(Error::param("k", format!("need 1 ≤ k ≤ {n}")));
    }
    let s: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    if n <= 400 {
        let mut a = DMatrix::<f64>::zeros(n, n);
        for &(i, j, v) in entries {
            let v = v / (s[i] * s[j]);
            a[(i, j)] += v;
            if i != j {
                a[(j, i)] += v;
            }
        }
        let eig = SymmetricEigen::new(a);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let vals = idx[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = idx[..k]
            .iter()
            .map(|&i| (0..n).map(|r| eig.eigenvectors[(r, i)] / s[r]).collect())
            .collect();
        return Ok((vals, vecs));
    }
    let chol = Skyline::from_entries(n, entries).cholesky()?;
    let op = |v: &[f64]| -> Vec<f64> {
        let mut w: Vec<f64> = v.iter().zip(&s).map(|(a, b)| a * b).collect();
        chol.solve(&mut w);
        w.iter_mut().zip(&s).for_each(|(a, b)| *a *= b);
        w
    };
    let mut m = (2 * k + 40).min(n);
    loop {
        let (theta, vecs, ok) = lanczos(&op, n, m, k, seed);
        if ok || m == n {
            let vals = theta.iter().map(|t| 1.0 / t).collect();
            let vecs = vecs
                .into_iter()
                .map(|v| v.iter().zip(&s).map(|(a, b)| a / b).collect())
                .collect();
            return Ok((vals, vecs));
        }
        m = (2 * m).min(n);
    }
}

/// Largest `k` eigenpairs of a symmetric operator by Lanczos with full
/// reorthogonalisation; returns whether all `k` residuals are below 1e-10.
fn lanczos<F: Fn(&[f64]) -> Vec<f64>>(
    op: &F,
    n: usize,
    m: usize,
    k: usize,
    seed: u64,
) -> (Vec<f64>, Vec<Vec<f64>>, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nq = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut last_beta = 0.0;
    for j in 0..m {
        let mut w = op(&basis[j]);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = dot(&w, &w).sqrt();
        last_beta = bnorm;
        if j + 1 == m || bnorm <= 1e-13 * a.abs().max(1e-300) {
            break;
        }
        beta.push(bnorm);
        w.iter_mut().for_each(|v| *v /= bnorm);
        basis.push(w);
    }
    let mm = alpha.len();
    let mut t = DMatrix::<f64>::zeros(mm, mm);
    for i in 0..mm {
        t[(i, i)] = alpha[i];
        if i + 1 < mm {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut idx: Vec<usize> = (0..mm).collect();
    idx.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let kk = k.min(mm);
    let top = eig.eigenvalues[idx[0]].abs();
    let mut ok = kk == k;
    let mut theta = Vec::with_capacity(kk);
    let mut vecs = Vec::with_capacity(kk);
    for &i in &idx[..kk] {
        let res = (last_beta * eig.eigenvectors[(mm - 1, i)]).abs();
        if res > 1e-10 * top && mm < n {
            ok = false;
        }
        theta.push(eig.eigenvalues[i]);
        let mut v = vec![0.0; n];
        for (c, b) in basis.iter().take(mm).enumerate() {
            let coef = eig.eigenvectors[(c, i)];
            v.iter_mut().zip(b).for_each(|(x, y)| *x += coef * y);
        }
        vecs.push(v);
    }
    (theta, vecs, ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Vec<(usize, usize, f64)> {
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, 2.0));
            if i + 1 < n {
                e.push((i + 1, i, -1.0));
            }
        }
        e
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let n = 50;
        let c = Skyline::from_entries(n, &laplacian_1d(n)).cholesky().unwrap();
        let mut b = vec![1.0; n];
        c.solve(&mut b);
        // exact: x_i = (i+1)(n-i)/2
        for (i, x) in b.iter().enumerate() {
            let exact = ((i + 1) * (n - i)) as f64 / 2.0;
            assert!((x - exact).abs() < 1e-9 * exact);
        }
    }

    #[test]
    fn lanczos_matches_closed_form() {
        let n = 600;
        let (vals, vecs) = lowest_eigenpairs(n, &laplacian_1d(n), &vec![1.0; n], 5, 1).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v / exact - 1.0).abs() < 1e-9, "{k} {v} {exact}");
        }
        assert!((dot(&vecs[0], &vecs[0]) - 1.0).abs() < 1e-9);
    }
}
