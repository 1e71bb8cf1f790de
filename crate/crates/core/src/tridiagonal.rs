//! Generalized eigenproblem `A x = λ W x` for a symmetric tridiagonal
//! stiffness `A = Dᵀ diag(r) D` (a conservative second-difference operator
//! with Dirichlet ends) and a positive diagonal weight `W`.
//!
//! Eigenvalues come from bisection on the inertia of `A - σW`, eigenvectors
//! from inverse iteration. The LDLᵀ pivots are carried in differential form
//! (`d_k = r_{k+1} + e_k`) so the cancellation between diagonal and
//! off-diagonal entries of a fine-grid stiffness matrix never happens
//! explicitly, and small eigenvalues keep their relative accuracy.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct StiffnessPencil {
    /// Interval couplings `r_0..r_m` (one more than the number of unknowns).
    coupling: Vec<f64>,
    /// Diagonal weights of the `m` interior unknowns.
    weight: Vec<f64>,
}

impl StiffnessPencil {
    pub fn new(coupling: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        if coupling.len() != weight.len() + 1 || weight.is_empty() {
            return Err(Error::EigenFailure(format!(
                "pencil shape mismatch: {} couplings for {} unknowns",
                coupling.len(),
                weight.len()
            )));
        }
        if coupling.iter().chain(&weight).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::EigenFailure("pencil entries must be finite and positive".into()));
        }
        Ok(StiffnessPencil { coupling, weight })
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    /// Pivots of the LDLᵀ factorization of `A - σW`.
    fn pivots(&self, sigma: f64) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.dim());
        self.for_each_pivot(sigma, |dk| d.push(dk));
        d
    }

    /// Runs the pivot recurrence `e_k = r_k e_{k-1} / d_{k-1} - σ w_k`,
    /// `d_k = r_{k+1} + e_k`.
    fn for_each_pivot(&self, sigma: f64, mut visit: impl FnMut(f64)) {
        let r = &self.coupling;
        let mut e = r[0] - sigma * self.weight[0];
        let mut prev = 1.0;
        for k in 0..self.dim() {
            if k > 0 {
                e = r[k] * e / prev - sigma * self.weight[k];
            }
            let mut dk = r[k + 1] + e;
            if dk == 0.0 {
                dk = -f64::EPSILON * r[k + 1];
                e = dk - r[k + 1];
            }
            visit(dk);
            prev = dk;
        }
    }

    /// Number of eigenvalues strictly below `sigma` (Sylvester inertia).
    pub fn count_below(&self, sigma: f64) -> usize {
        let mut count = 0;
        self.for_each_pivot(sigma, |dk| {
            if dk < 0.0 {
                count += 1;
            }
        });
        count
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.dim() {
            return Err(Error::EigenFailure(format!("eigenvalue {k} out of range")));
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut doublings = 0;
        while self.count_below(hi) <= k {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 2100 || !hi.is_finite() {
                return Err(Error::EigenFailure("no upper bracket for eigenvalue".into()));
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * hi {
                return Ok(mid);
            }
            if self.count_below(mid) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::EigenFailure(format!("bisection for eigenvalue {k} did not converge")))
    }

    /// Applies `A` to `x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let r = &self.coupling;
        let m = self.dim();
        (0..m)
            .map(|k| {
                let mut y = (r[k] + r[k + 1]) * x[k];
                if k > 0 {
                    y -= r[k] * x[k - 1];
                }
                if k + 1 < m {
                    y -= r[k + 1] * x[k + 1];
                }
                y
            })
            .collect()
    }

    /// Solves `(A - σW) x = b`.
    fn shifted_solve(&self, sigma: f64, b: &[f64]) -> Vec<f64> {
        let r = &self.coupling;
        let d = self.pivots(sigma);
        let m = self.dim();
        // L has subdiagonal l_k = -r_k / d_{k-1}
        let mut y = b.to_vec();
        for k in 1..m {
            y[k] += r[k] / d[k - 1] * y[k - 1];
        }
        let mut x = vec![0.0; m];
        x[m - 1] = y[m - 1] / d[m - 1];
        for k in (0..m - 1).rev() {
            x[k] = y[k] / d[k] + r[k + 1] / d[k] * x[k + 1];
        }
        x
    }

    fn weighted_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.weight).map(|((x, y), w)| x * y * w).sum()
    }

    /// Eigenvector for eigenvalue `lambda` (index `k` seeds the start vector),
    /// normalized to `xᵀWx = 1`.
    pub fn eigenvector(&self, lambda: f64, k: usize) -> Result<Vec<f64>> {
        let m = self.dim();
        let mut x: Vec<f64> = (0..m).map(|i| start_component(i, k)).collect();
        // nudge off the exact eigenvalue so the factorization stays regular
        let sigma = lambda * (1.0 + 4.0 * f64::EPSILON);
        for _ in 0..4 {
            let rhs: Vec<f64> = x.iter().zip(&self.weight).map(|(v, w)| v * w).collect();
            x = self.shifted_solve(sigma, &rhs);
            let norm = self.weighted_dot(&x, &x).sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::EigenFailure(format!("inverse iteration broke down for eigenvalue {k}")));
            }
            x.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(x)
    }

    /// The `count` smallest eigenpairs, eigenvectors `W`-orthonormal.
    pub fn lowest(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let pairs: Vec<(f64, Vec<f64>)> = (0..count)
            .into_par_iter()
            .map(|k| {
                let lambda = self.eigenvalue(k)?;
                let v = self.eigenvector(lambda, k)?;
                Ok((lambda, v))
            })
            .collect::<Result<_>>()?;
        let (values, mut vectors): (Vec<f64>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
        // re-orthogonalize against round-off coupling between neighbours
        for k in 0..vectors.len() {
            let (done, rest) = vectors.split_at_mut(k);
            let v = &mut rest[0];
            for u in done.iter() {
                let c = self.weighted_dot(u, v);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
            let norm = self.weighted_dot(v, v).sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
        }
        Ok((values, vectors))
    }
}

fn start_component(i: usize, k: usize) -> f64 {
    let t = (i as f64 * 12.9898 + k as f64 * 78.233 + 0.5).sin() * 43758.5453;
    t - t.floor() - 0.5
}
