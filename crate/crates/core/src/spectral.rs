//! Periodic horizontal grid: wavenumbers, FFTs, the 2/3 dealiasing mask and
//! spectral Sobolev norms.
//!
//! Spectra use the unnormalized DFT `û_j = Σ_x u(x) e^{-ik_j x}`, so
//! `‖u‖²_{L²} = (L/Nx²) Σ_j |û_j|²`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalGrid {
    pub nx: usize,
    pub length: f64,
}

impl HorizontalGrid {
    pub fn new(nx: usize, length: f64) -> Result<Self> {
        if nx < 4 || nx % 2 != 0 {
            return Err(Error::invalid(format!("nx must be even and at least 4, got {nx}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("horizontal length must be positive, got {length}")));
        }
        Ok(HorizontalGrid { nx, length })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    /// Signed integer index of FFT slot `j`.
    pub fn index(&self, j: usize) -> i64 {
        if j <= self.nx / 2 {
            j as i64
        } else {
            j as i64 - self.nx as i64
        }
    }

    /// Wavenumber of FFT slot `j`, used for even-order derivatives.
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * self.index(j) as f64 / self.length
    }

    /// Wavenumber for odd-order derivatives: zero at the Nyquist slot so
    /// that derivatives of real fields stay real.
    pub fn derivative_wavenumber(&self, j: usize) -> f64 {
        if j == self.nx / 2 {
            0.0
        } else {
            self.wavenumber(j)
        }
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.wavenumber(j)).collect()
    }

    pub fn derivative_wavenumbers(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.derivative_wavenumber(j)).collect()
    }

    /// 2/3-rule mask: keeps `|index| ≤ nx/3`.
    pub fn dealias_mask(&self) -> Vec<bool> {
        (0..self.nx)
            .map(|j| 3 * self.index(j).unsigned_abs() as usize <= self.nx)
            .collect()
    }

    /// `‖u‖²_{H^s} = (L/Nx²) Σ (1 + k²)^s |û|²`.
    pub fn sobolev_norm_sq(&self, spectrum: &[Complex64], s: f64) -> f64 {
        let scale = self.length / (self.nx * self.nx) as f64;
        spectrum
            .iter()
            .enumerate()
            .map(|(j, u)| {
                let k = self.wavenumber(j);
                (1.0 + k * k).powf(s) * u.norm_sqr()
            })
            .sum::<f64>()
            * scale
    }

    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        (values.iter().map(|v| v * v).sum::<f64>() * self.dx()).sqrt()
    }
}

/// Cached forward/inverse FFT plans for one grid size.
#[derive(Clone)]
pub struct Fourier {
    nx: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("nx", &self.nx).finish()
    }
}

impl Fourier {
    pub fn new(nx: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fourier {
            nx,
            forward: planner.plan_fft_forward(nx),
            inverse: planner.plan_fft_inverse(nx),
        }
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform, returning the real part.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut buf = spectrum.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.nx as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }

    /// Spectral x-derivative of a real sample vector.
    pub fn derivative(&self, grid: &HorizontalGrid, values: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(values);
        for (j, u) in spec.iter_mut().enumerate() {
            *u *= Complex64::new(0.0, grid.derivative_wavenumber(j));
        }
        self.inverse(&spec)
    }
}

/// Largest violation of `û(-k) = conj(û(k))`.
pub fn conjugate_symmetry_defect(spectrum: &[Complex64]) -> f64 {
    let n = spectrum.len();
    (0..n)
        .map(|j| (spectrum[j] - spectrum[(n - j) % n].conj()).norm())
        .fold(0.0, f64::max)
}
