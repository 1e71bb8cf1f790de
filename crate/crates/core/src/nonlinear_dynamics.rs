//! Weakly nonlinear modal system for constant `N` on the unit depth:
//!
//! ```text
//! (1 - μ/(π²n²) ∂x²) ∂t V_n + c_n ∂x ρ_n
//!     = -ε/√2 Σ [V_p ∂x V_q + s (q/p) (∂x V_p) V_q]
//! ∂t ρ_n + c_n ∂x V_n
//!     = ε/(N²√2) Σ s [V_p ∂x ρ_q + (q/p) (∂x V_p) ρ_q]
//! ```
//!
//! with `c_n = N/(nπ)`, sums over ordered pairs `(p, q)` with
//! `p + q = n` (`s = +1`) or `|p - q| = n` (`s = -1`). Products are formed
//! pseudo-spectrally with 2/3-rule dealiasing and time stepping is RK4.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixing::selection;
use crate::spectral::{conjugate_symmetry_defect, Fourier, HorizontalGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonlinearParams {
    pub epsilon: f64,
    pub mu: f64,
    pub buoyancy: f64,
}

/// One admissible ordered pair feeding mode `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interaction {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub sign: f64,
}

/// Interaction list for modes `1..=modes`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionList {
    pub modes: usize,
    pub pairs: Vec<Interaction>,
    /// Pairs `p, q ≤ M` with `p + q > M`, whose output mode is truncated.
    pub dropped: usize,
}

impl InteractionList {
    pub fn new(modes: usize) -> Self {
        let mut pairs = Vec::new();
        for n in 1..=modes {
            for p in 1..=modes {
                for q in 1..=modes {
                    if let Some(branch) = selection(p, q, n) {
                        pairs.push(Interaction {
                            p,
                            q,
                            n,
                            sign: branch.sign(),
                        });
                    }
                }
            }
        }
        let dropped = (1..=modes)
            .flat_map(|p| (1..=modes).map(move |q| (p, q)))
            .filter(|(p, q)| p + q > modes)
            .count();
        InteractionList { modes, pairs, dropped }
    }

    pub fn feeding(&self, n: usize) -> impl Iterator<Item = &Interaction> {
        self.pairs.iter().filter(move |i| i.n == n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearState {
    pub time: f64,
    /// `v[n-1][j]`: spectrum of `V_n`.
    pub v: Vec<Vec<Complex64>>,
    pub rho: Vec<Vec<Complex64>>,
}

impl NonlinearState {
    pub fn zeros(modes: usize, nx: usize) -> Self {
        NonlinearState {
            time: 0.0,
            v: vec![vec![Complex64::new(0.0, 0.0); nx]; modes],
            rho: vec![vec![Complex64::new(0.0, 0.0); nx]; modes],
        }
    }

    /// State from physical samples `v[n-1]`, `rho[n-1]`, with the dealiasing
    /// mask applied.
    pub fn from_physical(grid: &HorizontalGrid, v: &[Vec<f64>], rho: &[Vec<f64>]) -> Result<Self> {
        if v.len() != rho.len() || v.iter().chain(rho).any(|c| c.len() != grid.nx) {
            return Err(Error::Grid("initial fields do not match the grid".into()));
        }
        let fft = Fourier::new(grid.nx);
        let mask = grid.dealias_mask();
        let spec = |x: &Vec<f64>| -> Vec<Complex64> {
            fft.forward(x)
                .into_iter()
                .zip(&mask)
                .map(|(c, keep)| if *keep { c } else { Complex64::new(0.0, 0.0) })
                .collect()
        };
        Ok(NonlinearState {
            time: 0.0,
            v: v.iter().map(spec).collect(),
            rho: rho.iter().map(spec).collect(),
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

    fn axpy(&self, a: f64, d: &NonlinearState) -> NonlinearState {
        let add = |x: &[Vec<Complex64>], y: &[Vec<Complex64>]| -> Vec<Vec<Complex64>> {
            x.iter()
                .zip(y)
                .map(|(u, w)| u.iter().zip(w).map(|(p, q)| p + q * a).collect())
                .collect()
        };
        NonlinearState {
            time: self.time + a,
            v: add(&self.v, &d.v),
            rho: add(&self.rho, &d.rho),
        }
    }

    fn is_finite(&self) -> bool {
        self.v
            .iter()
            .chain(&self.rho)
            .flatten()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearSystem {
    pub params: NonlinearParams,
    pub grid: HorizontalGrid,
    pub interactions: InteractionList,
    fft: Fourier,
    mask: Vec<bool>,
}

/// Per-mode norms at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationSample {
    pub time: f64,
    pub v_norms: Vec<f64>,
    pub rho_norms: Vec<f64>,
}

impl NonlinearSystem {
    pub fn new(params: NonlinearParams, grid: HorizontalGrid, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("at least one mode is required"));
        }
        if !(0.0..=1.0).contains(&params.epsilon) {
            return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {}", params.epsilon)));
        }
        if !(params.mu > 0.0 && params.mu <= 1.0) {
            return Err(Error::invalid(format!("mu must lie in (0, 1], got {}", params.mu)));
        }
        if !(params.buoyancy > 0.0) || !params.buoyancy.is_finite() {
            return Err(Error::invalid("buoyancy frequency must be positive"));
        }
        Ok(NonlinearSystem {
            params,
            grid,
            interactions: InteractionList::new(modes),
            fft: Fourier::new(grid.nx),
            mask: grid.dealias_mask(),
        })
    }

    pub fn mode_count(&self) -> usize {
        self.interactions.modes
    }

    /// `c_n = N/(nπ)`.
    pub fn speed(&self, n: usize) -> f64 {
        self.params.buoyancy / (n as f64 * PI)
    }

    pub fn speeds(&self) -> Vec<f64> {
        (1..=self.mode_count()).map(|n| self.speed(n)).collect()
    }

    /// Advisory CFL limit `0.5 Δx / max c_n`.
    pub fn cfl_limit(&self) -> f64 {
        0.5 * self.grid.dx() / self.speed(1)
    }

    fn check(&self, state: &NonlinearState) -> Result<()> {
        let nx = self.grid.nx;
        if state.v.len() != self.mode_count()
            || state.rho.len() != self.mode_count()
            || state.v.iter().chain(&state.rho).any(|c| c.len() != nx)
        {
            return Err(Error::Grid(format!(
                "state does not match {} modes on {nx} points",
                self.mode_count()
            )));
        }
        Ok(())
    }

    fn derivative_spectrum(&self, s: &[Complex64]) -> Vec<Complex64> {
        s.iter()
            .enumerate()
            .map(|(j, c)| c * Complex64::new(0.0, self.grid.derivative_wavenumber(j)))
            .collect()
    }

    /// Time derivative of `state`.
    pub fn rhs(&self, state: &NonlinearState) -> Result<NonlinearState> {
        self.check(state)?;
        let m = self.mode_count();
        let nx = self.grid.nx;
        let eps = self.params.epsilon;
        let n2 = self.params.buoyancy * self.params.buoyancy;

        // physical V, ∂x V, ρ, ∂x ρ per mode
        let physical: Vec<[Vec<f64>; 4]> = if eps != 0.0 {
            (0..m)
                .into_par_iter()
                .map(|n| {
                    [
                        self.fft.inverse(&state.v[n]),
                        self.fft.inverse(&self.derivative_spectrum(&state.v[n])),
                        self.fft.inverse(&state.rho[n]),
                        self.fft.inverse(&self.derivative_spectrum(&state.rho[n])),
                    ]
                })
                .collect()
        } else {
            Vec::new()
        };

        let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = (1..=m)
            .into_par_iter()
            .map(|n| {
                let mut nv = vec![Complex64::new(0.0, 0.0); nx];
                let mut nr = vec![Complex64::new(0.0, 0.0); nx];
                if eps != 0.0 {
                    let mut sv = vec![0.0; nx];
                    let mut sr = vec![0.0; nx];
                    let mut any = false;
                    for it in self.interactions.feeding(n) {
                        any = true;
                        let [vp, dvp, _, _] = &physical[it.p - 1];
                        let [vq, dvq, rq, drq] = &physical[it.q - 1];
                        let ratio = it.q as f64 / it.p as f64;
                        for x in 0..nx {
                            sv[x] += vp[x] * dvq[x] + it.sign * ratio * dvp[x] * vq[x];
                            sr[x] += it.sign * (vp[x] * drq[x] + ratio * dvp[x] * rq[x]);
                        }
                    }
                    if any {
                        let cv = -eps * FRAC_1_SQRT_2;
                        let cr = eps * FRAC_1_SQRT_2 / n2;
                        nv = self.fft.forward(&sv).into_iter().map(|c| c * cv).collect();
                        nr = self.fft.forward(&sr).into_iter().map(|c| c * cr).collect();
                    }
                }
                let c = self.speed(n);
                let i = Complex64::new(0.0, 1.0);
                let mut dv = vec![Complex64::new(0.0, 0.0); nx];
                let mut dr = vec![Complex64::new(0.0, 0.0); nx];
                for j in 0..nx {
                    if !self.mask[j] {
                        continue;
                    }
                    let k = self.grid.wavenumber(j);
                    let kd = self.grid.derivative_wavenumber(j);
                    let mass = 1.0 + self.params.mu * k * k / (PI * PI * (n * n) as f64);
                    dv[j] = (-i * kd * c * state.rho[n - 1][j] + nv[j]) / mass;
                    dr[j] = -i * kd * c * state.v[n - 1][j] + nr[j];
                }
                (dv, dr)
            })
            .collect();
        let (v, rho) = rows.into_iter().unzip();
        Ok(NonlinearState {
            time: state.time,
            v,
            rho,
        })
    }

    pub fn step_rk4(&self, state: &NonlinearState, dt: f64) -> Result<NonlinearState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        let k1 = self.rhs(state)?;
        let k2 = self.rhs(&state.axpy(0.5 * dt, &k1))?;
        let k3 = self.rhs(&state.axpy(0.5 * dt, &k2))?;
        let k4 = self.rhs(&state.axpy(dt, &k3))?;
        let combine = |s: &[Vec<Complex64>], a: &[Vec<Complex64>], b: &[Vec<Complex64>], c: &[Vec<Complex64>], d: &[Vec<Complex64>]| {
            (0..s.len())
                .map(|n| {
                    (0..s[n].len())
                        .map(|j| s[n][j] + (a[n][j] + (b[n][j] + c[n][j]) * 2.0 + d[n][j]) * (dt / 6.0))
                        .collect()
                })
                .collect()
        };
        let out = NonlinearState {
            time: state.time + dt,
            v: combine(&state.v, &k1.v, &k2.v, &k3.v, &k4.v),
            rho: combine(&state.rho, &k1.rho, &k2.rho, &k3.rho, &k4.rho),
        };
        if !out.is_finite() {
            return Err(Error::BlowupDetected { time: out.time });
        }
        Ok(out)
    }

    pub fn activation(&self, state: &NonlinearState) -> ActivationSample {
        let norm = |s: &Vec<Complex64>| self.grid.sobolev_norm_sq(s, 0.0).sqrt();
        ActivationSample {
            time: state.time,
            v_norms: state.v.iter().map(norm).collect(),
            rho_norms: state.rho.iter().map(norm).collect(),
        }
    }

    /// Runs `steps` RK4 steps, sampling mode norms every `every` steps.
    pub fn run(
        &self,
        initial: &NonlinearState,
        dt: f64,
        steps: usize,
        every: usize,
    ) -> Result<(NonlinearState, Vec<ActivationSample>)> {
        self.check(initial)?;
        let every = every.max(1);
        let mut state = initial.clone();
        let mut history = vec![self.activation(&state)];
        for step in 1..=steps {
            state = self.step_rk4(&state, dt)?;
            if step % every == 0 || step == steps {
                history.push(self.activation(&state));
            }
        }
        Ok((state, history))
    }
}

/// Per-mode norm table from saved snapshots.
pub fn mode_activation_history(system: &NonlinearSystem, trajectory: &[NonlinearState]) -> Vec<ActivationSample> {
    trajectory.iter().map(|s| system.activation(s)).collect()
}
