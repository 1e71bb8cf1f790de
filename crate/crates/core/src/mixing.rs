//! Inter-mode coupling: the dispersive interaction matrix `α_{mn}` and the
//! quadratic coefficients `β_{pqn}`, `γ_{pqn}` of the constant-`N` modes.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sturm_liouville::ModeSet;

/// Which branch of `(p ± q)² = n²` admits a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `p + q = n`.
    Sum,
    /// `|p - q| = n`.
    Difference,
}

impl Branch {
    /// Sign of `γ` on this branch.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Sum => 1.0,
            Branch::Difference => -1.0,
        }
    }
}

pub fn selection(p: usize, q: usize, n: usize) -> Option<Branch> {
    if p + q == n {
        Some(Branch::Sum)
    } else if p.abs_diff(q) == n {
        Some(Branch::Difference)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Triad {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub branch: Branch,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingTensor {
    pub alpha: DMatrix<f64>,
    /// Nonzero `(β, γ)` triples with `p, q, n ≤ M`; empty unless the mode set
    /// has constant `N`.
    pub triads: Vec<Triad>,
}

/// `α_{mn} = ∫ ρ f_m f_n dz` by trapezoidal quadrature.
pub fn alpha_matrix(modes: &ModeSet) -> DMatrix<f64> {
    let m = modes.mode_count();
    let kernel: Vec<f64> = modes
        .quadrature_weights
        .iter()
        .zip(&modes.weight_rho)
        .map(|(q, r)| q * r)
        .collect();
    let mut alpha = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v: f64 = modes.f[i]
                .iter()
                .zip(&modes.f[j])
                .zip(&kernel)
                .map(|((a, b), k)| a * b * k)
                .sum();
            alpha[(i, j)] = v;
            alpha[(j, i)] = v;
        }
    }
    alpha
}

/// Closed-form `(β_{pqn}, γ_{pqn})` for the unit-depth constant-`N` modes.
pub fn beta_gamma(p: usize, q: usize, n: usize) -> (f64, f64) {
    match selection(p, q, n) {
        Some(branch) => (std::f64::consts::FRAC_1_SQRT_2, branch.sign() * std::f64::consts::FRAC_1_SQRT_2),
        None => (0.0, 0.0),
    }
}

/// `β = ∫ g_p g_q g_n`, `γ = -N² ∫ f_p f_q g_n` over `(-1, 0)` by the
/// trapezoidal rule on `grid_size` points, which is exact for these
/// trigonometric products once `grid_size > p + q + n`.
pub fn beta_gamma_quadrature(p: usize, q: usize, n: usize, buoyancy: f64, grid_size: usize) -> Result<(f64, f64)> {
    if p == 0 || q == 0 || n == 0 {
        return Err(Error::invalid("mode indices start at 1"));
    }
    let top = p.max(q).max(n);
    let modes = ModeSet::explicit_boussinesq(buoyancy, 1.0, grid_size, top)?;
    let (fp, fq) = (&modes.f[p - 1], &modes.f[q - 1]);
    let (gp, gq, gn) = (&modes.g[p], &modes.g[q], &modes.g[n]);
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for i in 0..grid_size {
        let w = modes.quadrature_weights[i];
        beta += w * gp[i] * gq[i] * gn[i];
        gamma += w * fp[i] * fq[i] * gn[i];
    }
    Ok((beta, -buoyancy * buoyancy * gamma))
}

/// Every admissible triple with `1 ≤ p, q, n ≤ modes`.
pub fn interaction_set(modes: usize) -> Vec<Triad> {
    let mut out = Vec::new();
    for n in 1..=modes {
        for p in 1..=modes {
            for q in 1..=modes {
                if let Some(branch) = selection(p, q, n) {
                    let (beta, gamma) = beta_gamma(p, q, n);
                    out.push(Triad {
                        p,
                        q,
                        n,
                        branch,
                        beta,
                        gamma,
                    });
                }
            }
        }
    }
    out
}

pub fn mixing_tensor(modes: &ModeSet) -> MixingTensor {
    let triads = if modes.constant_buoyancy(1e-8).is_some() {
        interaction_set(modes.mode_count())
    } else {
        Vec::new()
    };
    MixingTensor {
        alpha: alpha_matrix(modes),
        triads,
    }
}

/// `A(k)_{nm} = δ_{nm} + k² c_n c_m α_{nm}`, checked for positive definiteness.
pub fn coupled_mass_matrix(alpha: &DMatrix<f64>, speeds: &[f64], k: f64) -> Result<DMatrix<f64>> {
    let m = speeds.len();
    if alpha.nrows() != m || alpha.ncols() != m {
        return Err(Error::Grid(format!(
            "alpha is {}x{}, expected {m}x{m}",
            alpha.nrows(),
            alpha.ncols()
        )));
    }
    let a = DMatrix::from_fn(m, m, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta + k * k * speeds[i] * speeds[j] * alpha[(i, j)]
    });
    if Cholesky::new(a.clone()).is_none() {
        return Err(Error::MassMatrixDegenerate { k });
    }
    Ok(a)
}

/// Spectral condition number of a symmetric positive-definite matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let max = eig.iter().copied().fold(f64::MIN, f64::max);
    let min = eig.iter().copied().fold(f64::MAX, f64::min);
    max / min
}
