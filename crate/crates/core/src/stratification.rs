//! Background density profiles and the buoyancy (Brunt–Väisälä) frequency.
//!
//! Profiles live on a uniform vertical grid spanning `[-H, 0]`. Two forms of
//! the vertical eigenproblem are supported, selected by [`Variant`]:
//!
//! * `Full`: the variable-density problem, `N² = -g ρ'/ρ`.
//! * `Boussinesq`: the strong Boussinesq form, where the density only enters
//!   through buoyancy, `N² = -g ρ'/ρ_ref` with `ρ_ref` the surface density.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Boussinesq,
}

/// Parameters for the supported profile families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileKind {
    /// `ρ0·exp(-z/scale_height)`.
    Exponential { rho0: f64, scale_height: f64 },
    /// Constant buoyancy frequency `n`: `ρ0·exp(-n²z/g)` for the full variant,
    /// `ρ0·(1 - n²z/g)` for the Boussinesq variant.
    ConstantN { n: f64, rho0: f64 },
    /// Samples `(z, rho)` with `z` ascending from `-H` to `0`, resampled onto
    /// the uniform grid by monotone cubic interpolation.
    Tabulated { z: Vec<f64>, rho: Vec<f64> },
    /// `ρ+·exp(-δz) - (ρ+ - ρ-)·χ((z - z0)/δ)` with `χ` the smoothed jump.
    SmoothedJump {
        rho_plus: f64,
        rho_minus: f64,
        z0: f64,
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub z: Vec<f64>,
    pub rho: Vec<f64>,
    pub g: f64,
    pub depth: f64,
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruntVaisala {
    pub n2: Vec<f64>,
}

impl DensityProfile {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.depth / (self.z.len() - 1) as f64
    }

    /// Reference density of the Boussinesq variant (the surface value).
    pub fn reference_density(&self) -> f64 {
        *self.rho.last().expect("profile has samples")
    }

    /// Density used as the weight of the vertical inner products: `ρ_eq` for
    /// the full variant, unity for the Boussinesq variant.
    pub fn weight_density(&self) -> Vec<f64> {
        match self.variant {
            Variant::Full => self.rho.clone(),
            Variant::Boussinesq => vec![1.0; self.rho.len()],
        }
    }

    /// Trapezoidal weights for the profile grid.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.len(), self.spacing())
    }

    /// Builds a profile directly from samples that already sit on a uniform
    /// grid spanning `[-H, 0]`.
    pub fn from_uniform_samples(rho: Vec<f64>, depth: f64, g: f64, variant: Variant) -> Result<Self> {
        check_common(rho.len(), depth, g)?;
        let z = uniform_grid(rho.len(), depth);
        let profile = DensityProfile {
            z,
            rho,
            g,
            depth,
            variant,
        };
        profile.validate()?;
        Ok(profile)
    }

    fn validate(&self) -> Result<()> {
        if let Some((i, r)) = self.rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(Error::invalid(format!("rho[{i}] = {r} is not positive")));
        }
        for i in 1..self.rho.len() {
            if self.rho[i] > self.rho[i - 1] {
                return Err(Error::StratificationUnstable {
                    index: i,
                    lower: self.rho[i - 1],
                    upper: self.rho[i],
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn uniform_grid(len: usize, depth: f64) -> Vec<f64> {
    let n = (len - 1) as f64;
    (0..len)
        .map(|i| {
            if i == len - 1 {
                0.0
            } else {
                -depth + depth * i as f64 / n
            }
        })
        .collect()
}

pub(crate) fn trapezoid_weights(len: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; len];
    w[0] = 0.5 * h;
    w[len - 1] = 0.5 * h;
    w
}

fn check_common(grid_size: usize, depth: f64, g: f64) -> Result<()> {
    if grid_size < 3 {
        return Err(Error::invalid(format!("grid_size must be at least 3, got {grid_size}")));
    }
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::invalid(format!("depth must be positive, got {depth}")));
    }
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::invalid(format!("gravity must be positive, got {g}")));
    }
    Ok(())
}

pub fn build_profile(
    kind: &ProfileKind,
    grid_size: usize,
    depth: f64,
    g: f64,
    variant: Variant,
) -> Result<DensityProfile> {
    check_common(grid_size, depth, g)?;
    let z = uniform_grid(grid_size, depth);
    let rho: Vec<f64> = match kind {
        ProfileKind::Exponential { rho0, scale_height } => {
            if !(*rho0 > 0.0) || !(*scale_height > 0.0) {
                return Err(Error::invalid("exponential profile needs rho0 > 0 and scale_height > 0"));
            }
            z.iter().map(|&z| rho0 * (-z / scale_height).exp()).collect()
        }
        ProfileKind::ConstantN { n, rho0 } => {
            if !(*n > 0.0) || !(*rho0 > 0.0) {
                return Err(Error::invalid("constant_n profile needs n > 0 and rho0 > 0"));
            }
            let n2 = n * n;
            match variant {
                Variant::Full => z.iter().map(|&z| rho0 * (-n2 * z / g).exp()).collect(),
                Variant::Boussinesq => z.iter().map(|&z| rho0 * (1.0 - n2 * z / g)).collect(),
            }
        }
        ProfileKind::Tabulated { z: zs, rho } => resample_tabulated(zs, rho, &z, depth)?,
        ProfileKind::SmoothedJump {
            rho_plus,
            rho_minus,
            z0,
            delta,
        } => {
            if !(*delta > 0.0 && *delta < 1.0) {
                return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
            }
            if !(*z0 > -depth && *z0 < 0.0) {
                return Err(Error::invalid(format!("z0 must lie in (-H, 0), got {z0}")));
            }
            if !(*rho_plus > *rho_minus && *rho_minus > 0.0) {
                return Err(Error::invalid(format!(
                    "smoothed jump needs rho_plus > rho_minus > 0, got {rho_plus}, {rho_minus}"
                )));
            }
            z.iter()
                .map(|&z| {
                    rho_plus * (-delta * z).exp()
                        - (rho_plus - rho_minus) * smoothed_jump((z - z0) / delta)
                })
                .collect()
        }
    };
    let profile = DensityProfile {
        z,
        rho,
        g,
        depth,
        variant,
    };
    profile.validate()?;
    Ok(profile)
}

/// Reads a `z,rho` CSV file into a tabulated profile kind.
pub fn read_profile_csv(path: &Path) -> Result<ProfileKind> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "z" || &headers[1] != "rho" {
        return Err(parse_err(format!("expected header `z,rho`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut z = Vec::new();
    let mut rho = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let value = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("row {}: {e}", line + 2)))
        };
        z.push(value(0)?);
        rho.push(value(1)?);
    }
    Ok(ProfileKind::Tabulated { z, rho })
}

fn resample_tabulated(zs: &[f64], rho: &[f64], grid: &[f64], depth: f64) -> Result<Vec<f64>> {
    if zs.len() != rho.len() {
        return Err(Error::invalid("tabulated z and rho differ in length"));
    }
    if zs.len() < 3 {
        return Err(Error::invalid("tabulated profile needs at least 3 rows"));
    }
    if zs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("tabulated z must be strictly increasing"));
    }
    let tol = 1e-9 * depth;
    if (zs[0] + depth).abs() > tol || zs[zs.len() - 1].abs() > tol {
        return Err(Error::invalid(format!(
            "tabulated z must span [-{depth}, 0], found [{}, {}]",
            zs[0],
            zs[zs.len() - 1]
        )));
    }
    if let Some(i) = rho.iter().position(|r| !(*r > 0.0)) {
        return Err(Error::invalid(format!("tabulated rho[{i}] is not positive")));
    }
    if let Some(i) = (1..rho.len()).find(|&i| rho[i] > rho[i - 1]) {
        return Err(Error::StratificationUnstable {
            index: i,
            lower: rho[i - 1],
            upper: rho[i],
        });
    }
    let interp = MonotoneCubic::new(zs, rho);
    Ok(grid.iter().map(|&z| interp.eval(z)).collect())
}

/// Fritsch–Carlson monotone piecewise cubic Hermite interpolant.
struct MonotoneCubic<'a> {
    x: &'a [f64],
    y: &'a [f64],
    slopes: Vec<f64>,
}

impl<'a> MonotoneCubic<'a> {
    fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        let n = x.len();
        let secant: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secant[0];
        slopes[n - 1] = secant[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secant[i - 1], secant[i]);
            if a * b <= 0.0 {
                slopes[i] = 0.0;
            } else {
                // Weighted harmonic mean keeps the interpolant monotone.
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                slopes[i] = (w0 + w1) / (w0 / a + w1 / b);
            }
        }
        MonotoneCubic { x, y, slopes }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&t).expect("finite abscissa")) {
            Ok(i) => return self.y[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * self.y[i] + h10 * h * self.slopes[i] + h01 * self.y[i + 1] + h11 * h * self.slopes[i + 1];
        let (lo, hi) = if self.y[i] <= self.y[i + 1] {
            (self.y[i], self.y[i + 1])
        } else {
            (self.y[i + 1], self.y[i])
        };
        v.clamp(lo, hi)
    }
}

/// Unnormalized bump `exp(-1/(x(1-x)))` on `(0, 1)`.
fn raw_bump(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        (-1.0 / (x * (1.0 - x))).exp()
    }
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| adaptive_simpson(raw_bump, 0.0, 1.0, 1e-17))
}

/// Unit-mass smooth bump supported in `(0, 1)`.
pub fn bump(x: f64) -> f64 {
    raw_bump(x) / bump_mass()
}

/// Smoothed jump `χ(x) = ∫_{-∞}^x bump`: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smoothed_jump(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else if x <= 0.5 {
        adaptive_simpson(raw_bump, 0.0, x, 1e-17) / bump_mass()
    } else {
        1.0 - adaptive_simpson(raw_bump, x, 1.0, 1e-17) / bump_mass()
    }
}

pub(crate) fn adaptive_simpson(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: impl Fn(f64) -> f64 + Copy,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Centered first derivative on a uniform grid, second-order one-sided
/// stencils at both ends.
pub(crate) fn uniform_derivative(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    d
}

pub fn brunt_vaisala(profile: &DensityProfile) -> Result<BruntVaisala> {
    let h = profile.spacing();
    let g = profile.g;
    let n2: Vec<f64> = match profile.variant {
        Variant::Full => {
            let log_rho: Vec<f64> = profile.rho.iter().map(|r| r.ln()).collect();
            uniform_derivative(&log_rho, h).into_iter().map(|d| -g * d).collect()
        }
        Variant::Boussinesq => {
            let rho_ref = profile.reference_density();
            uniform_derivative(&profile.rho, h)
                .into_iter()
                .map(|d| -g * d / rho_ref)
                .collect()
        }
    };
    if let Some(i) = n2.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveBuoyancy {
            z: profile.z[i],
            value: n2[i],
        });
    }
    Ok(BruntVaisala { n2 })
}
