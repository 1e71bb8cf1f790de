//! Linear modal wave systems on a periodic horizontal grid.
//!
//! Per wavenumber the unknowns `V̂_n, ρ̂_n` (`n = 1..M`) obey
//!
//! ```text
//! A(k) ∂t V̂ = -i k C ρ̂,    ∂t ρ̂ = -i k C V̂,
//! A(k) = I + μ k² C α C,    C = diag(c_n).
//! ```
//!
//! With constant `N`, `α = I/N²` and each mode is an independent 2×2 system
//! that is propagated exactly. Otherwise the coupled system is advanced by
//! the implicit midpoint rule.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mixing::alpha_matrix;
use crate::modal_transform::{reconstruct, ModalCoefficients, PhysicalFields};
use crate::spectral::{conjugate_symmetry_defect, Fourier, HorizontalGrid};
use crate::stratification::uniform_derivative;
use crate::sturm_liouville::ModeSet;

/// `ω = c|k| / √(1 + μ c²k²/N²)`.
pub fn dispersion(speed: f64, buoyancy: f64, k: f64, mu: f64) -> f64 {
    speed * k.abs() / (1.0 + mu * speed * speed * k * k / (buoyancy * buoyancy)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// Constant buoyancy frequency `N`.
    Uncoupled { buoyancy: f64 },
    Coupled { alpha: DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub speeds: Vec<f64>,
    pub coupling: Coupling,
    /// Scale of the non-hydrostatic term (`1` for the physical system).
    pub mu: f64,
    pub grid: HorizontalGrid,
}

/// Spectral state: `v[n-1][j]`, `rho[n-1][j]` at FFT slot `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearState {
    pub time: f64,
    pub v: Vec<Vec<Complex64>>,
    pub rho: Vec<Vec<Complex64>>,
}

impl LinearState {
    pub fn zeros(modes: usize, nx: usize) -> Self {
        LinearState {
            time: 0.0,
            v: vec![vec![Complex64::new(0.0, 0.0); nx]; modes],
            rho: vec![vec![Complex64::new(0.0, 0.0); nx]; modes],
        }
    }

    /// Transforms the `n ≥ 1` velocity and density coefficients; `V_0` must
    /// vanish.
    pub fn from_modal(coeffs: &ModalCoefficients) -> Result<Self> {
        if coeffs.v[0].iter().any(|v| v.abs() > 1e-12) {
            return Err(Error::invalid("the barotropic velocity V_0 must vanish"));
        }
        let fft = Fourier::new(coeffs.grid.nx);
        Ok(LinearState {
            time: 0.0,
            v: coeffs.v[1..].iter().map(|c| fft.forward(c)).collect(),
            rho: coeffs.rho.iter().map(|c| fft.forward(c)).collect(),
        })
    }

    pub fn mode_count(&self) -> usize {
        self.v.len()
    }

    pub fn conjugate_symmetry_defect(&self) -> f64 {
        self.v
            .iter()
            .chain(&self.rho)
            .map(|s| conjugate_symmetry_defect(s))
            .fold(0.0, f64::max)
    }

    /// `√(‖V_n‖² + ‖ρ_n‖²)` for each mode.
    pub fn mode_norms(&self, grid: &HorizontalGrid) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.rho)
            .map(|(v, r)| (grid.sobolev_norm_sq(v, 0.0) + grid.sobolev_norm_sq(r, 0.0)).sqrt())
            .collect()
    }

    fn lerp(&self, other: &LinearState, scale: f64, offset: f64) -> LinearState {
        let combine = |a: &[Vec<Complex64>], b: &[Vec<Complex64>]| -> Vec<Vec<Complex64>> {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (q * scale) + p * offset).collect())
                .collect()
        };
        LinearState {
            time: self.time,
            v: combine(&self.v, &other.v),
            rho: combine(&self.rho, &other.rho),
        }
    }
}

impl LinearSystem {
    /// Uncoupled system for a constant-`N` mode set.
    pub fn uncoupled(modes: &ModeSet, grid: HorizontalGrid, mu: f64) -> Result<Self> {
        let n2 = modes
            .constant_buoyancy(1e-6)
            .ok_or_else(|| Error::invalid("uncoupled dynamics needs constant N"))?;
        Self::with_speeds(modes.speeds.clone(), Coupling::Uncoupled { buoyancy: n2.sqrt() }, grid, mu)
    }

    pub fn coupled(modes: &ModeSet, grid: HorizontalGrid, mu: f64) -> Result<Self> {
        Self::with_speeds(
            modes.speeds.clone(),
            Coupling::Coupled {
                alpha: alpha_matrix(modes),
            },
            grid,
            mu,
        )
    }

    pub fn with_speeds(speeds: Vec<f64>, coupling: Coupling, grid: HorizontalGrid, mu: f64) -> Result<Self> {
        if speeds.is_empty() || speeds.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::invalid("mode speeds must be positive"));
        }
        if !(mu >= 0.0) {
            return Err(Error::invalid(format!("mu must be non-negative, got {mu}")));
        }
        match &coupling {
            Coupling::Uncoupled { buoyancy } if !(*buoyancy > 0.0) => {
                return Err(Error::invalid("buoyancy frequency must be positive"));
            }
            Coupling::Coupled { alpha } if alpha.shape() != (speeds.len(), speeds.len()) => {
                return Err(Error::Grid("alpha does not match the number of modes".into()));
            }
            _ => {}
        }
        Ok(LinearSystem {
            speeds,
            coupling,
            mu,
            grid,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.speeds.len()
    }

    /// `α` as a matrix (`I/N²` when uncoupled).
    pub fn alpha(&self) -> DMatrix<f64> {
        match &self.coupling {
            Coupling::Uncoupled { buoyancy } => DMatrix::identity(self.mode_count(), self.mode_count()) / (buoyancy * buoyancy),
            Coupling::Coupled { alpha } => alpha.clone(),
        }
    }

    pub fn mass_matrix(&self, k: f64) -> DMatrix<f64> {
        let c = &self.speeds;
        let alpha = self.alpha();
        DMatrix::from_fn(c.len(), c.len(), |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            delta + self.mu * k * k * c[i] * c[j] * alpha[(i, j)]
        })
    }

    /// Angular frequency of mode `n` (1-based) in the uncoupled system.
    pub fn frequency(&self, n: usize, k: f64) -> Result<f64> {
        match self.coupling {
            Coupling::Uncoupled { buoyancy } => Ok(dispersion(self.speeds[n - 1], buoyancy, k, self.mu)),
            Coupling::Coupled { .. } => Err(Error::invalid("closed-form dispersion needs the uncoupled system")),
        }
    }

    fn check(&self, state: &LinearState) -> Result<()> {
        let nx = self.grid.nx;
        if state.v.len() != self.mode_count()
            || state.rho.len() != self.mode_count()
            || state.v.iter().chain(&state.rho).any(|s| s.len() != nx)
        {
            return Err(Error::Grid(format!(
                "state does not match {} modes on {nx} points",
                self.mode_count()
            )));
        }
        Ok(())
    }

    /// `Σ_k [V̂* A(k) V̂ + |ρ̂|²]` over the discrete spectrum.
    pub fn energy(&self, state: &LinearState) -> f64 {
        let m = self.mode_count();
        (0..self.grid.nx)
            .map(|j| {
                let a = self.mass_matrix(self.grid.wavenumber(j));
                let mut e = 0.0;
                for p in 0..m {
                    e += state.rho[p][j].norm_sqr();
                    for q in 0..m {
                        e += (state.v[p][j].conj() * state.v[q][j]).re * a[(p, q)];
                    }
                }
                e
            })
            .sum()
    }

    /// Right-hand side `(∂t V̂, ∂t ρ̂)`.
    pub fn tendency(&self, state: &LinearState) -> Result<LinearState> {
        self.check(state)?;
        let m = self.mode_count();
        let mut out = LinearState::zeros(m, self.grid.nx);
        out.time = state.time;
        let i = Complex64::new(0.0, 1.0);
        for j in 0..self.grid.nx {
            let kd = self.grid.derivative_wavenumber(j);
            let rhs: Vec<Complex64> = (0..m).map(|n| -i * kd * self.speeds[n] * state.rho[n][j]).collect();
            let dv = solve_complex(&self.factor(self.grid.wavenumber(j), 0.0)?, &rhs);
            for n in 0..m {
                out.v[n][j] = dv[n];
                out.rho[n][j] = -i * kd * self.speeds[n] * state.v[n][j];
            }
        }
        Ok(out)
    }

    /// Cholesky factor of `A(k) + a² kd² C²`.
    fn factor(&self, k: f64, shift: f64) -> Result<Cholesky<f64, Dyn>> {
        let mut a = self.mass_matrix(k);
        for (n, c) in self.speeds.iter().enumerate() {
            a[(n, n)] += shift * c * c;
        }
        Cholesky::new(a).ok_or(Error::MassMatrixDegenerate { k })
    }

    /// Exact propagator (uncoupled) or implicit midpoint (coupled) for a
    /// fixed step.
    pub fn propagator(&self, dt: f64) -> Result<Propagator> {
        if !dt.is_finite() {
            return Err(Error::invalid("time step must be finite"));
        }
        match self.coupling {
            Coupling::Uncoupled { buoyancy } => {
                let m = self.mode_count();
                let mut rot = Vec::with_capacity(m);
                for c in &self.speeds {
                    let row = (0..self.grid.nx)
                        .map(|j| {
                            let k = self.grid.wavenumber(j);
                            let kd = self.grid.derivative_wavenumber(j);
                            let a = 1.0 + self.mu * c * c * k * k / (buoyancy * buoyancy);
                            let sa = a.sqrt();
                            let theta = kd * c / sa * dt;
                            Rotation {
                                sqrt_mass: sa,
                                cos: theta.cos(),
                                sin: theta.sin(),
                            }
                        })
                        .collect();
                    rot.push(row);
                }
                Ok(Propagator::Exact { dt, rot })
            }
            Coupling::Coupled { .. } => {
                let half = 0.5 * dt;
                let factors = (0..self.grid.nx)
                    .into_par_iter()
                    .map(|j| {
                        let kd = self.grid.derivative_wavenumber(j);
                        let k = self.grid.wavenumber(j);
                        Ok(MidpointBlock {
                            mass: self.mass_matrix(k),
                            factor: self
                                .factor(k, half * half * kd * kd)
                                .map_err(|_| Error::StepFailure(format!("midpoint matrix singular at k = {k}")))?,
                            ak: half * kd,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Propagator::Midpoint {
                    dt,
                    speeds: self.speeds.clone(),
                    blocks: factors,
                })
            }
        }
    }

    pub fn step(&self, state: &LinearState, dt: f64) -> Result<LinearState> {
        self.check(state)?;
        let mut out = state.clone();
        self.propagator(dt)?.apply(&mut out);
        Ok(out)
    }

    /// Modal coefficients on the horizontal grid, with `w_n` and `P_n`
    /// recovered from `V_n`, `ρ_n` and the time derivative `dt_state`.
    pub fn modal_coefficients(&self, state: &LinearState, dt_state: &LinearState) -> Result<ModalCoefficients> {
        self.check(state)?;
        self.check(dt_state)?;
        let grid = self.grid;
        let m = self.mode_count();
        let fft = Fourier::new(grid.nx);
        let i = Complex64::new(0.0, 1.0);
        let mut out = ModalCoefficients::zeros(grid, m);
        let alpha = self.alpha();
        // ∂t ŵ_m = -i kd c_m ∂t V̂_m
        let dw: Vec<Vec<Complex64>> = (0..m)
            .map(|n| {
                (0..grid.nx)
                    .map(|j| -i * grid.derivative_wavenumber(j) * self.speeds[n] * dt_state.v[n][j])
                    .collect()
            })
            .collect();
        for n in 0..m {
            let c = self.speeds[n];
            let w_hat: Vec<Complex64> = (0..grid.nx)
                .map(|j| -i * grid.derivative_wavenumber(j) * c * state.v[n][j])
                .collect();
            let p_hat: Vec<Complex64> = (0..grid.nx)
                .map(|j| {
                    let mix: Complex64 = (0..m).map(|q| alpha[(q, n)] * dw[q][j]).sum();
                    c * state.rho[n][j] + self.mu * c * mix
                })
                .collect();
            out.v[n + 1] = fft.inverse(&state.v[n]);
            out.rho[n] = fft.inverse(&state.rho[n]);
            out.w[n] = fft.inverse(&w_hat);
            out.p[n + 1] = fft.inverse(&p_hat);
        }
        Ok(out)
    }

    /// Physical fields of `state` on the `z × x` grid.
    pub fn physical_fields(&self, state: &LinearState, modes: &ModeSet) -> Result<PhysicalFields> {
        let tendency = self.tendency(state)?;
        reconstruct(&self.modal_coefficients(state, &tendency)?, modes)
    }

    /// Max-norm residuals of the physical linear equations between two saved
    /// states a step `dt` apart, evaluated at their midpoint.
    pub fn pde_residual(&self, s0: &LinearState, s1: &LinearState, modes: &ModeSet) -> Result<PdeResidual> {
        let dt = s1.time - s0.time;
        if !(dt.abs() > 0.0) {
            return Err(Error::invalid("residual needs two states at distinct times"));
        }
        let mid = s0.lerp(s1, 0.5, 0.5);
        let rate = s0.lerp(s1, 1.0 / dt, -1.0 / dt);
        // time derivatives of the derived fields, via the same linear maps
        let rate_of_rate = self.tendency(&rate)?;
        let fields = reconstruct(&self.modal_coefficients(&mid, &rate)?, modes)?;
        let rates = reconstruct(&self.modal_coefficients(&rate, &rate_of_rate)?, modes)?;
        Ok(physical_residual(&fields, &rates, modes, &self.grid, self.mu))
    }
}

/// Per-equation max-norm residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeResidual {
    /// `∂t V + ρ⁻¹ ∂x P`.
    pub horizontal_momentum: f64,
    /// `μ ∂t w + ρ⁻¹ ∂z P + g ρ/ρ_eq`.
    pub vertical_momentum: f64,
    /// `∂t ρ + w ρ'_eq`.
    pub density: f64,
    /// `∂x V + ∂z w`.
    pub continuity: f64,
}

impl PdeResidual {
    pub fn max(&self) -> f64 {
        self.horizontal_momentum
            .max(self.vertical_momentum)
            .max(self.density)
            .max(self.continuity)
    }
}

fn physical_residual(
    fields: &PhysicalFields,
    rates: &PhysicalFields,
    modes: &ModeSet,
    grid: &HorizontalGrid,
    mu: f64,
) -> PdeResidual {
    let fft = Fourier::new(grid.nx);
    let nz = modes.grid_len();
    let h = modes.spacing();
    let rho_eq = &modes.weight_rho;
    let neg_drho = modes.neg_density_gradient();
    let buoyancy_scale = 1.0 / modes.density_factor();
    let dx = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = m.clone();
        for i in 0..nz {
            let row: Vec<f64> = m.row(i).iter().copied().collect();
            let d = fft.derivative(grid, &row);
            for (j, v) in d.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    };
    let dz = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = m.clone();
        for j in 0..grid.nx {
            let col: Vec<f64> = m.column(j).iter().copied().collect();
            for (i, v) in uniform_derivative(&col, h).into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    };
    let px = dx(&fields.p);
    let pz = dz(&fields.p);
    let vx = dx(&fields.v);
    let wz = dz(&fields.w);
    let mut r = PdeResidual {
        horizontal_momentum: 0.0,
        vertical_momentum: 0.0,
        density: 0.0,
        continuity: 0.0,
    };
    for j in 0..grid.nx {
        for i in 0..nz {
            let h1 = rates.v[(i, j)] + px[(i, j)] / rho_eq[i];
            let h2 = mu * rates.w[(i, j)] + pz[(i, j)] / rho_eq[i] + buoyancy_scale * fields.rho[(i, j)] / rho_eq[i];
            let h3 = rates.rho[(i, j)] - fields.w[(i, j)] * neg_drho[i];
            let h4 = vx[(i, j)] + wz[(i, j)];
            r.horizontal_momentum = r.horizontal_momentum.max(h1.abs());
            r.vertical_momentum = r.vertical_momentum.max(h2.abs());
            r.density = r.density.max(h3.abs());
            r.continuity = r.continuity.max(h4.abs());
        }
    }
    r
}

fn solve_complex(factor: &Cholesky<f64, Dyn>, rhs: &[Complex64]) -> Vec<Complex64> {
    let re = factor.solve(&DVector::from_iterator(rhs.len(), rhs.iter().map(|c| c.re)));
    let im = factor.solve(&DVector::from_iterator(rhs.len(), rhs.iter().map(|c| c.im)));
    re.iter().zip(im.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct Rotation {
    sqrt_mass: f64,
    cos: f64,
    sin: f64,
}

#[derive(Debug, Clone)]
pub struct MidpointBlock {
    mass: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    ak: f64,
}

/// A step operator precomputed for one time step.
#[derive(Debug, Clone)]
pub enum Propagator {
    Exact {
        dt: f64,
        rot: Vec<Vec<Rotation>>,
    },
    Midpoint {
        dt: f64,
        speeds: Vec<f64>,
        blocks: Vec<MidpointBlock>,
    },
}

impl Propagator {
    pub fn dt(&self) -> f64 {
        match self {
            Propagator::Exact { dt, .. } | Propagator::Midpoint { dt, .. } => *dt,
        }
    }

    pub fn apply(&self, state: &mut LinearState) {
        let i = Complex64::new(0.0, 1.0);
        match self {
            Propagator::Exact { dt, rot } => {
                for (n, row) in rot.iter().enumerate() {
                    for (j, r) in row.iter().enumerate() {
                        // rotate (√A V̂, ρ̂)
                        let u = state.v[n][j] * r.sqrt_mass;
                        let p = state.rho[n][j];
                        let u1 = u * r.cos - i * r.sin * p;
                        let p1 = p * r.cos - i * r.sin * u;
                        state.v[n][j] = u1 / r.sqrt_mass;
                        state.rho[n][j] = p1;
                    }
                }
                state.time += dt;
            }
            Propagator::Midpoint { dt, speeds, blocks } => {
                let m = speeds.len();
                for (j, b) in blocks.iter().enumerate() {
                    let v0: Vec<Complex64> = (0..m).map(|n| state.v[n][j]).collect();
                    let r0: Vec<Complex64> = (0..m).map(|n| state.rho[n][j]).collect();
                    // (A + a²k²C²) S = 2 A V0 - 2 i a k C ρ0,  S = V0 + V1
                    let rhs: Vec<Complex64> = (0..m)
                        .map(|p| {
                            let av: Complex64 = (0..m).map(|q| v0[q] * b.mass[(p, q)]).sum();
                            av * 2.0 - i * 2.0 * b.ak * speeds[p] * r0[p]
                        })
                        .collect();
                    let s = solve_complex(&b.factor, &rhs);
                    for n in 0..m {
                        state.v[n][j] = s[n] - v0[n];
                        state.rho[n][j] = r0[n] - i * b.ak * speeds[n] * s[n];
                    }
                }
                state.time += dt;
            }
        }
    }
}

/// One row of a linear time series.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySample {
    pub time: f64,
    pub energy: f64,
    pub mode_norms: Vec<f64>,
}

/// Advances `steps` times, recording every `every` steps (and the start).
pub fn run_linear(
    system: &LinearSystem,
    initial: &LinearState,
    dt: f64,
    steps: usize,
    every: usize,
) -> Result<(LinearState, Vec<EnergySample>)> {
    system.check(initial)?;
    let prop = system.propagator(dt)?;
    let every = every.max(1);
    let mut state = initial.clone();
    let sample = |s: &LinearState| EnergySample {
        time: s.time,
        energy: system.energy(s),
        mode_norms: s.mode_norms(&system.grid),
    };
    let mut series = vec![sample(&state)];
    for step in 1..=steps {
        prop.apply(&mut state);
        if step % every == 0 || step == steps {
            series.push(sample(&state));
        }
    }
    Ok((state, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stratification::{brunt_vaisala, build_profile, ProfileKind, Variant};
    use crate::sturm_liouville::compute_modes;
    use std::f64::consts::PI;

    fn explicit_system(m: usize, nx: usize, coupled: bool) -> (ModeSet, LinearSystem) {
        let modes = ModeSet::explicit_boussinesq(PI, 1.0, 513, m).unwrap();
        let grid = HorizontalGrid::new(nx, 2.0).unwrap();
        let sys = if coupled {
            LinearSystem::coupled(&modes, grid, 1.0).unwrap()
        } else {
            LinearSystem::uncoupled(&modes, grid, 1.0).unwrap()
        };
        (modes, sys)
    }

    fn seeded_state(m: usize, grid: HorizontalGrid) -> LinearState {
        let fft = Fourier::new(grid.nx);
        let field = |n: usize, shift: f64| -> Vec<Complex64> {
            let x: Vec<f64> = grid
                .points()
                .iter()
                .map(|x| (PI * x + shift).sin() / (n as f64) + 0.3 * (2.0 * PI * x - shift).cos())
                .collect();
            fft.forward(&x)
        };
        LinearState {
            time: 0.0,
            v: (1..=m).map(|n| field(n, 0.1 * n as f64)).collect(),
            rho: (1..=m).map(|n| field(n, 1.0 + 0.2 * n as f64)).collect(),
        }
    }

    #[test]
    fn dispersion_values() {
        assert_eq!(dispersion(1.0, PI, 0.0, 1.0), 0.0);
        assert!((dispersion(1.0, PI, PI, 1.0) - PI / 2f64.sqrt()).abs() < 1e-15);
        let cap = dispersion(1.0, PI, 1e3, 1.0);
        assert!(cap <= PI && cap >= 0.999 * PI);
    }

    #[test]
    fn exact_step_of_single_mode() {
        let (_, sys) = explicit_system(1, 8, false);
        let mut s = LinearState::zeros(1, 8);
        s.v[0][1] = Complex64::new(1.0, 0.0);
        let dt = 0.37;
        let out = sys.step(&s, dt).unwrap();
        let k = sys.grid.wavenumber(1);
        let omega = sys.frequency(1, k).unwrap();
        assert!((out.v[0][1] - Complex64::new((omega * dt).cos(), 0.0)).norm() < 1e-14);
        assert!((sys.energy(&out) - sys.energy(&s)).abs() < 1e-14);
        // c_1 = 1: E = 1 + k²/N²
        assert!((sys.energy(&s) - (1.0 + k * k / (PI * PI))).abs() < 1e-14);
    }

    #[test]
    fn exact_step_identity_and_group() {
        let (_, sys) = explicit_system(3, 16, false);
        let s = seeded_state(3, sys.grid);
        let same = sys.step(&s, 0.0).unwrap();
        for (a, b) in same.v.iter().flatten().zip(s.v.iter().flatten()) {
            assert!((a - b).norm() <= 1e-15 * b.norm().max(1.0));
        }
        let back = sys.step(&sys.step(&s, 0.21).unwrap(), -0.21).unwrap();
        for (a, b) in back.v.iter().flatten().zip(s.v.iter().flatten()) {
            assert!((a - b).norm() < 1e-13);
        }
        let e0 = sys.energy(&s);
        let (end, series) = run_linear(&sys, &s, 0.01, 1000, 100).unwrap();
        assert_eq!(series.len(), 11);
        assert!(((sys.energy(&end) - e0) / e0).abs() < 1e-13);
        assert!(end.conjugate_symmetry_defect() < 1e-12);
        let zero = sys.step(&LinearState::zeros(3, 16), 0.4).unwrap();
        assert!(zero.v.iter().chain(&zero.rho).flatten().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn coupled_matches_exact_at_second_order() {
        let (_, exact) = explicit_system(3, 16, false);
        let (_, coupled) = explicit_system(3, 16, true);
        let s = seeded_state(3, exact.grid);
        let t = 0.5;
        let reference = exact.step(&s, t).unwrap();
        let errors: Vec<f64> = [20, 40, 80]
            .iter()
            .map(|&steps| {
                let (end, _) = run_linear(&coupled, &s, t / steps as f64, steps, steps).unwrap();
                end.v
                    .iter()
                    .flatten()
                    .zip(reference.v.iter().flatten())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.9..=2.1).contains(&order), "{errors:?}");
        }
    }

    #[test]
    fn coupled_energy_is_conserved() {
        let kind = ProfileKind::SmoothedJump {
            rho_plus: 1.03,
            rho_minus: 1.0,
            z0: -0.4,
            delta: 0.2,
        };
        let p = build_profile(&kind, 1025, 1.0, 9.81, Variant::Full).unwrap();
        let modes = compute_modes(&p, &brunt_vaisala(&p).unwrap(), 4).unwrap();
        let grid = HorizontalGrid::new(32, 20.0).unwrap();
        let sys = LinearSystem::coupled(&modes, grid, 1.0).unwrap();
        let s = seeded_state(4, grid);
        let e0 = sys.energy(&s);
        let (end, _) = run_linear(&sys, &s, 0.5, 2000, 2000).unwrap();
        assert!(((sys.energy(&end) - e0) / e0).abs() < 1e-10);
        assert!(end.conjugate_symmetry_defect() < 1e-12);
        let zero = LinearState::zeros(4, 32);
        let (z, _) = run_linear(&sys, &zero, 0.5, 10, 10).unwrap();
        assert!(z.v.iter().chain(&z.rho).flatten().all(|c| c.norm() == 0.0));
    }

    fn single_mode_residual(nz: usize) -> PdeResidual {
        let modes = ModeSet::explicit_boussinesq(PI, 1.0, nz, 2).unwrap();
        let grid = HorizontalGrid::new(16, 2.0).unwrap();
        let sys = LinearSystem::uncoupled(&modes, grid, 1.0).unwrap();
        let mut s = LinearState::zeros(2, 16);
        s.v[0][1] = Complex64::new(0.5, 0.0);
        s.v[0][15] = Complex64::new(0.5, 0.0);
        let s0 = sys.step(&s, 0.3).unwrap();
        let s1 = sys.step(&s0, 1e-4).unwrap();
        sys.pde_residual(&s0, &s1, &modes).unwrap()
    }

    #[test]
    fn residual_of_exact_solution_converges() {
        let coarse = single_mode_residual(129);
        let fine = single_mode_residual(257);
        assert!(fine.max() < 1e-3, "{fine:?}");
        let order = (coarse.max() / fine.max()).log2();
        assert!(order > 1.8, "{coarse:?} {fine:?}");

        let (modes, sys) = explicit_system(2, 8, false);
        let z = LinearState::zeros(2, 8);
        let mut z1 = z.clone();
        z1.time = 0.1;
        assert_eq!(sys.pde_residual(&z, &z1, &modes).unwrap().max(), 0.0);
    }

    #[test]
    fn variable_n_truncation_shows_in_residual() {
        let kind = ProfileKind::SmoothedJump {
            rho_plus: 1.03,
            rho_minus: 1.0,
            z0: -0.4,
            delta: 0.3,
        };
        let p = build_profile(&kind, 513, 1.0, 9.81, Variant::Full).unwrap();
        let residual = |m: usize| {
            let modes = compute_modes(&p, &brunt_vaisala(&p).unwrap(), m).unwrap();
            let grid = HorizontalGrid::new(16, 1.0).unwrap();
            let sys = LinearSystem::coupled(&modes, grid, 1.0).unwrap();
            let mut s = LinearState::zeros(m, 16);
            s.v[0][1] = Complex64::new(0.5, 0.0);
            s.v[0][15] = Complex64::new(0.5, 0.0);
            let s1 = sys.step(&s, 1e-4).unwrap();
            sys.pde_residual(&s, &s1, &modes).unwrap()
        };
        let few = residual(2);
        let many = residual(8);
        assert!(few.vertical_momentum > 10.0 * few.horizontal_momentum, "{few:?}");
        assert!(many.vertical_momentum < few.vertical_momentum, "{few:?} {many:?}");
    }

    #[test]
    fn uncoupled_needs_constant_n() {
        let kind = ProfileKind::SmoothedJump {
            rho_plus: 1.03,
            rho_minus: 1.0,
            z0: -0.4,
            delta: 0.3,
        };
        let p = build_profile(&kind, 257, 1.0, 9.81, Variant::Full).unwrap();
        let modes = compute_modes(&p, &brunt_vaisala(&p).unwrap(), 2).unwrap();
        let grid = HorizontalGrid::new(8, 1.0).unwrap();
        assert!(LinearSystem::uncoupled(&modes, grid, 1.0).is_err());
    }
}
