//! Convergence of the first mode towards the two-layer limit as a smoothed
//! density jump sharpens.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stratification::{brunt_vaisala, build_profile, DensityProfile, ProfileKind, Variant};
use crate::sturm_liouville::solve_modes;

fn check_jump(rho_plus: f64, rho_minus: f64, z0: f64) -> Result<()> {
    if !(rho_plus > rho_minus && rho_minus > 0.0) {
        return Err(Error::UnstableJump { rho_plus, rho_minus });
    }
    if !(z0 > -1.0 && z0 < 0.0) {
        return Err(Error::invalid(format!("interface depth must lie in (-1, 0), got {z0}")));
    }
    Ok(())
}

/// `c̄² = (ρ+ - ρ-) g / (ρ+/(z0+1) + ρ-/(-z0))`; returns `c̄`.
pub fn limit_speed(rho_plus: f64, rho_minus: f64, z0: f64, g: f64) -> Result<f64> {
    check_jump(rho_plus, rho_minus, z0)?;
    if !(g > 0.0) {
        return Err(Error::invalid("gravity must be positive"));
    }
    Ok(((rho_plus - rho_minus) * g / (rho_plus / (z0 + 1.0) + rho_minus / (-z0))).sqrt())
}

/// Slope `a = 1/(√((ρ+ - ρ-) g) (z0 + 1))` of the lower branch of `f̄`.
pub fn limit_slope(rho_plus: f64, rho_minus: f64, z0: f64, g: f64) -> f64 {
    1.0 / (((rho_plus - rho_minus) * g).sqrt() * (z0 + 1.0))
}

/// Piecewise-linear limit shape: `a(z+1)` below `z0`, `a(1+z0)z/z0` above.
pub fn limit_eigenfunction(rho_plus: f64, rho_minus: f64, z0: f64, g: f64, z: &[f64]) -> Result<Vec<f64>> {
    check_jump(rho_plus, rho_minus, z0)?;
    let a = limit_slope(rho_plus, rho_minus, z0, g);
    Ok(z.iter()
        .map(|&z| if z <= z0 { a * (z + 1.0) } else { a * (1.0 + z0) / z0 * z })
        .collect())
}

/// Discrete Rayleigh quotient `∫ρ(f')² / ∫ρN²f²` in the same quadrature as
/// the eigensolver, so it bounds the smallest eigenvalue from above.
pub fn rayleigh_quotient(profile: &DensityProfile, n2: &[f64], f: &[f64]) -> f64 {
    let h = profile.spacing();
    let rho = profile.weight_density();
    let n = f.len();
    let num: f64 = (0..n - 1)
        .map(|i| 0.5 * (rho[i] + rho[i + 1]) * (f[i + 1] - f[i]).powi(2) / h)
        .sum();
    let den: f64 = (1..n - 1).map(|i| h * rho[i] * n2[i] * f[i] * f[i]).sum();
    num / den
}

/// Linear interpolation of samples on a uniform grid.
fn sample_at(z: &[f64], f: &[f64], at: f64) -> f64 {
    let h = z[1] - z[0];
    let t = ((at - z[0]) / h).clamp(0.0, (z.len() - 1) as f64);
    let i = (t.floor() as usize).min(z.len() - 2);
    let w = t - i as f64;
    f[i] * (1.0 - w) + f[i + 1] * w
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub delta: f64,
    pub c1: f64,
    /// `|c_{1,δ}² - c̄²|`.
    pub c1_sq_err: f64,
    /// Sup-norm distance of the shapes, both scaled to one at `z0`.
    pub f_sup_err: f64,
    /// Rayleigh quotient of `f̄` for this profile.
    pub limit_rayleigh: f64,
    /// `f_{1,δ}` scaled to one at `z0`.
    #[serde(skip)]
    pub shape: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpLimitReport {
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub z0: f64,
    pub g: f64,
    pub grid_size: usize,
    pub cbar: f64,
    pub entries: Vec<SweepEntry>,
    pub speed_order: f64,
    pub shape_order: f64,
    #[serde(skip)]
    pub z: Vec<f64>,
    /// `f̄` scaled to one at `z0`.
    #[serde(skip)]
    pub limit_shape: Vec<f64>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fitted_order(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// First eigenpair `(c_1, f_1)` for one smoothed-jump profile.
pub fn first_mode(rho_plus: f64, rho_minus: f64, z0: f64, g: f64, delta: f64, grid_size: usize) -> Result<(DensityProfile, Vec<f64>, f64, Vec<f64>)> {
    let kind = ProfileKind::SmoothedJump {
        rho_plus,
        rho_minus,
        z0,
        delta,
    };
    let profile = build_profile(&kind, grid_size, 1.0, g, Variant::Full)?;
    let bv = brunt_vaisala(&profile)?;
    let modes = solve_modes(&profile, &bv, 1)?;
    let f = modes.f.into_iter().next().unwrap_or_default();
    Ok((profile, bv.n2, modes.speeds[0], f))
}

pub fn delta_sweep(rho_plus: f64, rho_minus: f64, z0: f64, g: f64, deltas: &[f64], grid_size: usize) -> Result<SharpLimitReport> {
    let cbar = limit_speed(rho_plus, rho_minus, z0, g)?;
    if deltas.len() < 2 {
        return Err(Error::invalid("the sweep needs at least two values of delta"));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("delta values must lie in (0, 1) and strictly decrease"));
    }
    if z0 + deltas[0] >= 0.0 {
        return Err(Error::invalid("transition layer must fit below the surface"));
    }
    if grid_size < 3 {
        return Err(Error::invalid("grid_size must be at least 3"));
    }
    let h = 1.0 / (grid_size - 1) as f64;
    let finest = deltas[deltas.len() - 1];
    if h > finest / 8.0 {
        return Err(Error::Resolution(format!(
            "grid spacing {h:.3e} does not resolve delta = {finest} (need at most {:.3e})",
            finest / 8.0
        )));
    }

    let z: Vec<f64> = (0..grid_size).map(|i| -1.0 + i as f64 * h).collect();
    let fbar = limit_eigenfunction(rho_plus, rho_minus, z0, g, &z)?;
    let bar_at = sample_at(&z, &fbar, z0);
    let limit_shape: Vec<f64> = fbar.iter().map(|v| v / bar_at).collect();

    let entries = deltas
        .par_iter()
        .map(|&delta| {
            let (profile, n2, c1, f) = first_mode(rho_plus, rho_minus, z0, g, delta, grid_size)?;
            let scale = sample_at(&profile.z, &f, z0);
            let shape: Vec<f64> = f.iter().map(|v| v / scale).collect();
            let f_sup_err = shape
                .iter()
                .zip(&limit_shape)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(SweepEntry {
                delta,
                c1,
                c1_sq_err: (c1 * c1 - cbar * cbar).abs(),
                f_sup_err,
                limit_rayleigh: rayleigh_quotient(&profile, &n2, &fbar),
                shape,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let tail = deltas.len() / 2;
    let fit = |pick: fn(&SweepEntry) -> f64| {
        let part = &entries[deltas.len() - tail.max(2)..];
        let x: Vec<f64> = part.iter().map(|e| e.delta).collect();
        let y: Vec<f64> = part.iter().map(pick).collect();
        fitted_order(&x, &y)
    };
    let speed_order = fit(|e| e.c1_sq_err);
    let shape_order = fit(|e| e.f_sup_err);
    Ok(SharpLimitReport {
        rho_plus,
        rho_minus,
        z0,
        g,
        grid_size,
        cbar,
        entries,
        speed_order,
        shape_order,
        z,
        limit_shape,
    })
}
