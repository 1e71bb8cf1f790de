//! Vertical normal modes.
//!
//! The full variant solves `(ρ f')' + (ρN²/c²) f = 0`, the Boussinesq
//! variant `f'' + (N²/c²) f = 0`, both with `f(-H) = f(0) = 0`. The
//! discretization is the conservative three-point stencil on the profile grid,
//! giving a symmetric-definite tridiagonal pencil `A f = λ B f` with
//! `λ = 1/c²` and `B = diag(ρ N²)`.
//!
//! Conventions used throughout the crate:
//! * `f_n` is unit in the trapezoidal `ρN²`-weighted norm, and its first
//!   interior sample is positive (discrete proxy for `f_n'(-H) > 0`);
//! * `g_0 = α/ρ` with `α = (∫ 1/ρ)^{-1/2}`, `g_n = c_n f_n'` (centered
//!   differences), unit in the `ρ`-weighted norm;
//! * in the Boussinesq variant the weight density `ρ` is identically one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stratification::{trapezoid_weights, uniform_derivative, uniform_grid, BruntVaisala, DensityProfile, Variant};
use crate::tridiagonal::StiffnessPencil;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub variant: Variant,
    pub z: Vec<f64>,
    /// `c_1 > c_2 > ... > c_M`.
    pub speeds: Vec<f64>,
    /// `f_1..f_M` sampled on `z`.
    pub f: Vec<Vec<f64>>,
    /// `g_0..g_M`; empty until [`derive_g`] runs.
    pub g: Vec<Vec<f64>>,
    pub alpha0: f64,
    pub quadrature_weights: Vec<f64>,
    /// Weight density of the inner products (`ρ_eq`, or ones for Boussinesq).
    pub weight_rho: Vec<f64>,
    pub n2: Vec<f64>,
    pub gravity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `f_n` in the `ρN²` weight.
    FBasis,
    /// `g_n` in the `ρ` weight.
    GBasis,
    /// `ρN² f_n` in the `(ρN²)^{-1}` weight.
    WeightedDual,
}

impl ModeSet {
    pub fn mode_count(&self) -> usize {
        self.speeds.len()
    }

    pub fn grid_len(&self) -> usize {
        self.z.len()
    }

    pub fn spacing(&self) -> f64 {
        self.z[1] - self.z[0]
    }

    pub fn depth(&self) -> f64 {
        -self.z[0]
    }

    pub fn has_g(&self) -> bool {
        self.g.len() == self.speeds.len() + 1
    }

    /// `ρN²` at each grid point.
    pub fn stratification_weight(&self) -> Vec<f64> {
        self.weight_rho.iter().zip(&self.n2).map(|(r, n)| r * n).collect()
    }

    /// Factor `1/g` in the density expansion: `1/g` for the full variant,
    /// one for the nondimensional Boussinesq variant.
    pub fn density_factor(&self) -> f64 {
        match self.variant {
            Variant::Full => 1.0 / self.gravity,
            Variant::Boussinesq => 1.0,
        }
    }

    /// `-ρ'_eq` as seen by the linear equations: `ρN²/g` (full) or `N²`
    /// (nondimensional Boussinesq, `g = 1`).
    pub fn neg_density_gradient(&self) -> Vec<f64> {
        let factor = self.density_factor();
        self.stratification_weight().into_iter().map(|v| v * factor).collect()
    }

    /// Whether `N²` is uniform to within `rel_tol`.
    pub fn constant_buoyancy(&self, rel_tol: f64) -> Option<f64> {
        let mean = self.n2.iter().sum::<f64>() / self.n2.len() as f64;
        self.n2
            .iter()
            .all(|v| (v - mean).abs() <= rel_tol * mean)
            .then_some(mean)
    }

    /// Closed-form Boussinesq modes for constant `N`:
    /// `c_n = NH/(nπ)`, `f_n = √(2/H)/N·sin(nπz/H)`, `g_n = √(2/H)·cos(nπz/H)`.
    pub fn explicit_boussinesq(buoyancy: f64, depth: f64, grid_size: usize, modes: usize) -> Result<Self> {
        if !(buoyancy > 0.0) || !(depth > 0.0) {
            return Err(Error::invalid("explicit modes need positive buoyancy and depth"));
        }
        if modes == 0 {
            return Err(Error::invalid("at least one mode is required"));
        }
        if grid_size < 3 {
            return Err(Error::invalid("grid_size must be at least 3"));
        }
        let z = uniform_grid(grid_size, depth);
        let pi = std::f64::consts::PI;
        let amp = (2.0 / depth).sqrt();
        let speeds = (1..=modes).map(|n| buoyancy * depth / (n as f64 * pi)).collect();
        let f = (1..=modes)
            .map(|n| {
                z.iter()
                    .enumerate()
                    .map(|(i, &z)| {
                        if i == 0 || i == grid_size - 1 {
                            0.0
                        } else {
                            amp / buoyancy * (n as f64 * pi * z / depth).sin()
                        }
                    })
                    .collect()
            })
            .collect();
        let mut g = vec![vec![1.0 / depth.sqrt(); grid_size]];
        g.extend((1..=modes).map(|n| z.iter().map(|&z| amp * (n as f64 * pi * z / depth).cos()).collect()));
        Ok(ModeSet {
            variant: Variant::Boussinesq,
            quadrature_weights: trapezoid_weights(grid_size, depth / (grid_size - 1) as f64),
            z,
            speeds,
            f,
            g,
            alpha0: 1.0 / depth.sqrt(),
            weight_rho: vec![1.0; grid_size],
            n2: vec![buoyancy * buoyancy; grid_size],
            gravity: 1.0,
        })
    }
}

pub fn solve_modes(profile: &DensityProfile, buoyancy: &BruntVaisala, modes: usize) -> Result<ModeSet> {
    let len = profile.len();
    if buoyancy.n2.len() != len {
        return Err(Error::Grid(format!(
            "buoyancy has {} samples, profile has {len}",
            buoyancy.n2.len()
        )));
    }
    if modes == 0 {
        return Err(Error::invalid("at least one mode is required"));
    }
    if modes > len / 4 {
        return Err(Error::Resolution(format!(
            "{modes} modes requested but a grid of {len} points resolves at most {}",
            len / 4
        )));
    }
    let h = profile.spacing();
    let weight_rho = profile.weight_density();
    let coupling: Vec<f64> = weight_rho.windows(2).map(|w| 0.5 * (w[0] + w[1]) / (h * h)).collect();
    let stratification: Vec<f64> = (1..len - 1).map(|i| weight_rho[i] * buoyancy.n2[i]).collect();
    let pencil = StiffnessPencil::new(coupling, stratification)?;
    let (lambdas, vectors) = pencil.lowest(modes)?;

    let mut speeds = Vec::with_capacity(modes);
    for (k, lambda) in lambdas.iter().enumerate() {
        if !(*lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::EigenFailure(format!("eigenvalue {} is {lambda}", k + 1)));
        }
        speeds.push(1.0 / lambda.sqrt());
    }
    if speeds.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::EigenFailure("eigen-speeds are not strictly decreasing".into()));
    }

    // pencil vectors are unit in Σ w x² ; the trapezoidal norm carries an extra h
    let scale = 1.0 / h.sqrt();
    let f = vectors
        .into_iter()
        .map(|v| {
            let sign = if v.iter().find(|x| x.abs() > 0.0).copied().unwrap_or(1.0) < 0.0 {
                -scale
            } else {
                scale
            };
            let mut full = Vec::with_capacity(len);
            full.push(0.0);
            full.extend(v.iter().map(|x| sign * x));
            full.push(0.0);
            full
        })
        .collect();

    Ok(ModeSet {
        variant: profile.variant,
        z: profile.z.clone(),
        speeds,
        f,
        g: Vec::new(),
        alpha0: 0.0,
        quadrature_weights: profile.quadrature_weights(),
        weight_rho,
        n2: buoyancy.n2.clone(),
        gravity: profile.g,
    })
}

/// Populates `g_0..g_M`.
pub fn derive_g(mut modes: ModeSet) -> ModeSet {
    let h = modes.spacing();
    let inv_rho_integral: f64 = modes
        .quadrature_weights
        .iter()
        .zip(&modes.weight_rho)
        .map(|(w, r)| w / r)
        .sum();
    let alpha0 = inv_rho_integral.powf(-0.5);
    let mut g = Vec::with_capacity(modes.mode_count() + 1);
    g.push(modes.weight_rho.iter().map(|r| alpha0 / r).collect());
    for (f, c) in modes.f.iter().zip(&modes.speeds) {
        g.push(uniform_derivative(f, h).into_iter().map(|d| c * d).collect());
    }
    modes.alpha0 = alpha0;
    modes.g = g;
    modes
}

/// Solves the eigenproblem and derives the `g` basis.
pub fn compute_modes(profile: &DensityProfile, buoyancy: &BruntVaisala, modes: usize) -> Result<ModeSet> {
    Ok(derive_g(solve_modes(profile, buoyancy, modes)?))
}

/// Gram matrix minus identity for one of the three modal families.
pub fn orthonormality_residual(modes: &ModeSet, which: Basis) -> Result<Vec<Vec<f64>>> {
    let w = &modes.quadrature_weights;
    let (family, weight): (&[Vec<f64>], Vec<f64>) = match which {
        Basis::FBasis => (&modes.f, modes.stratification_weight()),
        Basis::GBasis => {
            if !modes.has_g() {
                return Err(Error::invalid("g basis has not been derived"));
            }
            (&modes.g, modes.weight_rho.clone())
        }
        Basis::WeightedDual => {
            // (ρN² f_m, ρN² f_n) in the (ρN²)^{-1} weight = Σ w ρN² f_m f_n
            (&modes.f, modes.stratification_weight())
        }
    };
    let n = family.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 = (0..modes.grid_len())
                .map(|k| w[k] * weight[k] * family[i][k] * family[j][k])
                .sum();
            let r = dot - if i == j { 1.0 } else { 0.0 };
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}

/// Number of sign changes among the interior samples of `f`.
pub fn sign_changes(f: &[f64]) -> usize {
    let interior = &f[1..f.len() - 1];
    let scale = interior.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let signs: Vec<bool> = interior
        .iter()
        .filter(|v| v.abs() > 1e-12 * scale)
        .map(|v| *v > 0.0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}
