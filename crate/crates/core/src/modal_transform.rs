//! Projection of physical fields onto the modal bases and back.
//!
//! Fields are `nz × nx` matrices (rows follow the vertical grid of the
//! [`ModeSet`], columns the periodic horizontal grid). The expansions are
//!
//! ```text
//! V = Σ_{n≥0} V_n g_n          w = Σ_{n≥1} w_n f_n
//! ρ = F Σ_{n≥1} ρ_n ρN² f_n    P = Σ_{n≥0} P_n ρ g_n
//! ```
//!
//! with `F = 1/g` in the full variant and `F = 1` in the Boussinesq variant
//! (where the weight density `ρ` is one).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{Fourier, HorizontalGrid};
use crate::stratification::uniform_derivative;
use crate::sturm_liouville::{Basis, ModeSet};

/// Modal coefficient fields sampled on the horizontal grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalCoefficients {
    pub grid: HorizontalGrid,
    /// `V_0..V_M`.
    pub v: Vec<Vec<f64>>,
    /// `w_1..w_M` (index `n - 1`).
    pub w: Vec<Vec<f64>>,
    /// `ρ_1..ρ_M` (index `n - 1`).
    pub rho: Vec<Vec<f64>>,
    /// `P_0..P_M`.
    pub p: Vec<Vec<f64>>,
}

impl ModalCoefficients {
    pub fn zeros(grid: HorizontalGrid, modes: usize) -> Self {
        let z = vec![0.0; grid.nx];
        ModalCoefficients {
            grid,
            v: vec![z.clone(); modes + 1],
            w: vec![z.clone(); modes],
            rho: vec![z.clone(); modes],
            p: vec![z; modes + 1],
        }
    }

    pub fn mode_count(&self) -> usize {
        self.w.len()
    }

    fn check(&self, modes: &ModeSet) -> Result<()> {
        let m = modes.mode_count();
        let nx = self.grid.nx;
        let shapes_ok = self.v.len() == m + 1
            && self.p.len() == m + 1
            && self.w.len() == m
            && self.rho.len() == m
            && self.v.iter().chain(&self.w).chain(&self.rho).chain(&self.p).all(|c| c.len() == nx);
        if !shapes_ok {
            return Err(Error::Grid(format!(
                "coefficients do not match {m} modes on {nx} horizontal points"
            )));
        }
        Ok(())
    }

    /// Largest violation of `w_n = -c_n ∂x V_n`.
    pub fn divergence_defect(&self, modes: &ModeSet) -> f64 {
        let fft = Fourier::new(self.grid.nx);
        let mut worst = 0.0_f64;
        for (n, c) in modes.speeds.iter().enumerate() {
            let dv = fft.derivative(&self.grid, &self.v[n + 1]);
            for (w, d) in self.w[n].iter().zip(&dv) {
                worst = worst.max((w + c * d).abs());
            }
        }
        worst
    }
}

/// Physical fields on the `z × x` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalFields {
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub rho: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

fn check_field(field: &DMatrix<f64>, modes: &ModeSet) -> Result<()> {
    if field.nrows() != modes.grid_len() {
        return Err(Error::Grid(format!(
            "field has {} vertical samples, mode set has {}",
            field.nrows(),
            modes.grid_len()
        )));
    }
    Ok(())
}

/// `Σ_i q_i weight_i φ(z_i) F(z_i, x)` for each basis function `φ`.
fn project_family(field: &DMatrix<f64>, family: &[Vec<f64>], weight: &[f64], quad: &[f64]) -> Vec<Vec<f64>> {
    let nz = field.nrows();
    family
        .iter()
        .map(|phi| {
            let kernel: Vec<f64> = (0..nz).map(|i| quad[i] * weight[i] * phi[i]).collect();
            (0..field.ncols())
                .map(|j| field.column(j).iter().zip(&kernel).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect()
}

/// Per-mode horizontal fields from weighted vertical quadrature of `field`.
///
/// * `FBasis`: `(F, f_n)` in the `ρN²` weight, `n = 1..M`;
/// * `GBasis`: `(F, g_n)` in the `ρ` weight, `n = 0..M`;
/// * `WeightedDual`: `(F, ρN² f_n)` in the `(ρN²)^{-1}` weight, `n = 1..M`.
pub fn project(field: &DMatrix<f64>, modes: &ModeSet, basis: Basis) -> Result<Vec<Vec<f64>>> {
    check_field(field, modes)?;
    let quad = &modes.quadrature_weights;
    Ok(match basis {
        Basis::FBasis => project_family(field, &modes.f, &modes.stratification_weight(), quad),
        Basis::GBasis => {
            if !modes.has_g() {
                return Err(Error::invalid("g basis has not been derived"));
            }
            project_family(field, &modes.g, &modes.weight_rho, quad)
        }
        Basis::WeightedDual => project_family(field, &modes.f, &vec![1.0; modes.grid_len()], quad),
    })
}

/// Full modal decomposition of `(V, w, ρ, P)`.
pub fn decompose(fields: &PhysicalFields, modes: &ModeSet, grid: HorizontalGrid) -> Result<ModalCoefficients> {
    for f in [&fields.v, &fields.w, &fields.rho, &fields.p] {
        check_field(f, modes)?;
        if f.ncols() != grid.nx {
            return Err(Error::Grid(format!("field has {} columns, grid has {}", f.ncols(), grid.nx)));
        }
    }
    let v = project(&fields.v, modes, Basis::GBasis)?;
    let w = project(&fields.w, modes, Basis::FBasis)?;
    let inv_factor = 1.0 / modes.density_factor();
    let rho = project(&fields.rho, modes, Basis::WeightedDual)?
        .into_iter()
        .map(|c| c.into_iter().map(|x| x * inv_factor).collect())
        .collect();
    // (P, ρ g_n) in the 1/ρ weight
    let p = project_family(&fields.p, &modes.g, &vec![1.0; modes.grid_len()], &modes.quadrature_weights);
    Ok(ModalCoefficients { grid, v, w, rho, p })
}

/// `Σ_n c_n(x) φ_n(z) s(z)` as a `z × x` matrix.
fn synthesize_family(coeffs: &[Vec<f64>], family: &[Vec<f64>], scale: &[f64], nx: usize) -> DMatrix<f64> {
    let nz = scale.len();
    let mut out = DMatrix::zeros(nz, nx);
    for (c, phi) in coeffs.iter().zip(family) {
        for j in 0..nx {
            let cj = c[j];
            if cj == 0.0 {
                continue;
            }
            for i in 0..nz {
                out[(i, j)] += cj * phi[i] * scale[i];
            }
        }
    }
    out
}

/// Field with the given coefficients in one of the three families
/// (`f_n`, `g_n`, or `ρN² f_n`).
pub fn synthesize(coeffs: &[Vec<f64>], modes: &ModeSet, basis: Basis) -> Result<DMatrix<f64>> {
    let nx = coeffs.first().map_or(0, |c| c.len());
    let ones = vec![1.0; modes.grid_len()];
    Ok(match basis {
        Basis::FBasis => synthesize_family(coeffs, &modes.f, &ones, nx),
        Basis::GBasis => {
            if !modes.has_g() {
                return Err(Error::invalid("g basis has not been derived"));
            }
            synthesize_family(coeffs, &modes.g, &ones, nx)
        }
        Basis::WeightedDual => synthesize_family(coeffs, &modes.f, &modes.stratification_weight(), nx),
    })
}

pub fn reconstruct(coeffs: &ModalCoefficients, modes: &ModeSet) -> Result<PhysicalFields> {
    coeffs.check(modes)?;
    if !modes.has_g() {
        return Err(Error::invalid("g basis has not been derived"));
    }
    let nx = coeffs.grid.nx;
    let ones = vec![1.0; modes.grid_len()];
    let factor = modes.density_factor();
    let rho_scale: Vec<f64> = modes.stratification_weight().iter().map(|v| v * factor).collect();
    Ok(PhysicalFields {
        v: synthesize_family(&coeffs.v, &modes.g, &ones, nx),
        w: synthesize_family(&coeffs.w, &modes.f, &ones, nx),
        rho: synthesize_family(&coeffs.rho, &modes.f, &rho_scale, nx),
        p: synthesize_family(&coeffs.p, &modes.g, &modes.weight_rho, nx),
    })
}

/// Which field a vertical derivative is taken of.
#[derive(Debug, Clone, Copy)]
pub enum VerticalField<'a> {
    /// `w_1..w_M`; `∂z w = Σ (1/c_n) w_n g_n`.
    W(&'a [Vec<f64>]),
    /// `P_0..P_M`; `∂z P = -Σ (1/c_n) P_n ρN² f_n`.
    P(&'a [Vec<f64>]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerticalDerivative {
    pub basis: Basis,
    /// Indexed like the target family: `0..=M` for `GBasis`, `1..=M` (stored
    /// at `n - 1`) for `WeightedDual`.
    pub coeffs: Vec<Vec<f64>>,
}

pub fn vertical_derivative_coeffs(field: VerticalField<'_>, modes: &ModeSet) -> Result<VerticalDerivative> {
    let m = modes.mode_count();
    match field {
        VerticalField::W(w) => {
            if w.len() != m {
                return Err(Error::Grid(format!("expected {m} w coefficients, got {}", w.len())));
            }
            let nx = w.first().map_or(0, |c| c.len());
            let mut coeffs = vec![vec![0.0; nx]];
            coeffs.extend(w.iter().zip(&modes.speeds).map(|(c, s)| c.iter().map(|x| x / s).collect()));
            Ok(VerticalDerivative {
                basis: Basis::GBasis,
                coeffs,
            })
        }
        VerticalField::P(p) => {
            if p.len() != m + 1 {
                return Err(Error::Grid(format!("expected {} P coefficients, got {}", m + 1, p.len())));
            }
            let coeffs = p[1..]
                .iter()
                .zip(&modes.speeds)
                .map(|(c, s)| c.iter().map(|x| -x / s).collect())
                .collect();
            Ok(VerticalDerivative {
                basis: Basis::WeightedDual,
                coeffs,
            })
        }
    }
}

/// Discrete `T1 = ∂z((1/(-ρ'))∂z(ρ·))`, `T2 = ∂z(ρ∂z((1/(-ρ'))·))` and their
/// adjoints in the unweighted `L²(dz)` product.
///
/// Each operator acts on full-grid vectors; interior outputs use the
/// conservative three-point stencil, boundary outputs are extrapolated.
#[derive(Debug, Clone)]
pub struct VerticalOperatorPair {
    rho: Vec<f64>,
    neg_drho: Vec<f64>,
    h: f64,
}

impl VerticalOperatorPair {
    /// `floor` is the smallest admissible `|ρ'|`.
    pub fn new(modes: &ModeSet, floor: f64) -> Result<Self> {
        let neg_drho = modes.neg_density_gradient();
        if let Some(i) = neg_drho.iter().position(|v| !(v.abs() >= floor) || !v.is_finite()) {
            return Err(Error::OperatorSingular {
                z: modes.z[i],
                value: neg_drho[i].abs(),
            });
        }
        Ok(VerticalOperatorPair {
            rho: modes.weight_rho.clone(),
            neg_drho,
            h: modes.spacing(),
        })
    }

    /// `∂z(a ∂z v)`.
    fn conservative(&self, a: &[f64], v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let h2 = self.h * self.h;
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            let up = 0.5 * (a[i] + a[i + 1]);
            let down = 0.5 * (a[i - 1] + a[i]);
            out[i] = (up * (v[i + 1] - v[i]) - down * (v[i] - v[i - 1])) / h2;
        }
        extrapolate_ends(&mut out);
        out
    }

    fn inv_neg_drho(&self) -> Vec<f64> {
        self.neg_drho.iter().map(|v| 1.0 / v).collect()
    }

    pub fn t1(&self, u: &[f64]) -> Vec<f64> {
        let rho_u: Vec<f64> = u.iter().zip(&self.rho).map(|(a, b)| a * b).collect();
        self.conservative(&self.inv_neg_drho(), &rho_u)
    }

    pub fn t1_adjoint(&self, v: &[f64]) -> Vec<f64> {
        let inner = self.conservative(&self.inv_neg_drho(), v);
        inner.iter().zip(&self.rho).map(|(a, b)| a * b).collect()
    }

    pub fn t2(&self, u: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = u.iter().zip(&self.neg_drho).map(|(a, b)| a / b).collect();
        self.conservative(&self.rho, &scaled)
    }

    pub fn t2_adjoint(&self, v: &[f64]) -> Vec<f64> {
        let inner = self.conservative(&self.rho, v);
        inner.iter().zip(&self.neg_drho).map(|(a, b)| a / b).collect()
    }

    fn derivative(&self, v: &[f64]) -> Vec<f64> {
        uniform_derivative(v, self.h)
    }
}

fn extrapolate_ends(v: &mut [f64]) {
    let n = v.len();
    if n >= 4 {
        v[0] = 3.0 * v[1] - 3.0 * v[2] + v[3];
        v[n - 1] = 3.0 * v[n - 2] - 3.0 * v[n - 3] + v[n - 4];
    } else {
        v[0] = v[1];
        v[n - 1] = v[n - 2];
    }
}

/// Boundary traces `(|·|(-H), |·|(0))`, maximized over horizontal samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityResidual {
    pub order: usize,
    /// `∂z T1^{l-1} V0`; absent for `l = 0`.
    pub v: Option<[f64; 2]>,
    /// `(T2*)^l w0`.
    pub w: [f64; 2],
    /// `T2^l ρ0`.
    pub rho: [f64; 2],
}

fn traces(v: &[f64]) -> [f64; 2] {
    [v[0].abs(), v[v.len() - 1].abs()]
}

fn max_traces(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0].max(b[0]), a[1].max(b[1])]
}

fn iterate(op: impl Fn(&[f64]) -> Vec<f64>, v: &[f64], times: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    for _ in 0..times {
        out = op(&out);
    }
    out
}

/// Boundary-trace residuals of the compatibility conditions
/// `∂z T1^{l-1} V0 = 0`, `(T2*)^l w0 = 0`, `T2^l ρ0 = 0` for `l = 0..=k`.
pub fn compatibility_check(
    v0: &DMatrix<f64>,
    w0: &DMatrix<f64>,
    rho0: &DMatrix<f64>,
    ops: &VerticalOperatorPair,
    k: usize,
) -> Result<Vec<CompatibilityResidual>> {
    if k == 0 {
        return Err(Error::invalid("compatibility order k must be at least 1"));
    }
    let nz = ops.rho.len();
    for f in [v0, w0, rho0] {
        if f.nrows() != nz {
            return Err(Error::Grid(format!("field has {} vertical samples, operators expect {nz}", f.nrows())));
        }
    }
    let columns = |m: &DMatrix<f64>| -> Vec<Vec<f64>> { m.column_iter().map(|c| c.iter().copied().collect()).collect() };
    let (vc, wc, rc) = (columns(v0), columns(w0), columns(rho0));
    let mut out = Vec::with_capacity(k + 1);
    for l in 0..=k {
        let mut row = CompatibilityResidual {
            order: l,
            v: (l > 0).then_some([0.0, 0.0]),
            w: [0.0, 0.0],
            rho: [0.0, 0.0],
        };
        for col in &vc {
            if l > 0 {
                let t = ops.derivative(&iterate(|u| ops.t1(u), col, l - 1));
                row.v = Some(max_traces(row.v.unwrap_or([0.0, 0.0]), traces(&t)));
            }
        }
        for col in &wc {
            row.w = max_traces(row.w, traces(&iterate(|u| ops.t2_adjoint(u), col, l)));
        }
        for col in &rc {
            row.rho = max_traces(row.rho, traces(&iterate(|u| ops.t2(u), col, l)));
        }
        out.push(row);
    }
    Ok(out)
}

/// Partial sums of `Σ_n c_n^{-2ν} (‖V_n‖² + ‖w_n‖² + ‖ρ_n‖²)_{H^{s-ν}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub nu: f64,
    pub s: f64,
    /// Term `n` (stored at `n - 1`).
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
}

impl DecayReport {
    /// Ratio of the last two nonzero increments, when defined.
    pub fn last_increment_ratio(&self) -> Option<f64> {
        let t = &self.terms;
        let n = t.len();
        (n >= 2 && t[n - 2] != 0.0).then(|| t[n - 1] / t[n - 2])
    }
}

pub fn modal_decay_report(coeffs: &ModalCoefficients, modes: &ModeSet, nu: f64, s: f64) -> Result<DecayReport> {
    coeffs.check(modes)?;
    let fft = Fourier::new(coeffs.grid.nx);
    let norm = |v: &[f64]| coeffs.grid.sobolev_norm_sq(&fft.forward(v), s - nu);
    let terms: Vec<f64> = (0..modes.mode_count())
        .map(|i| {
            let weight = modes.speeds[i].powf(-2.0 * nu);
            weight * (norm(&coeffs.v[i + 1]) + norm(&coeffs.w[i]) + norm(&coeffs.rho[i]))
        })
        .collect();
    let partial_sums = terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    Ok(DecayReport {
        nu,
        s,
        terms,
        partial_sums,
    })
}
