//! JSON run configuration shared by all commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stratification::{ProfileKind, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Inline profile description.
    #[serde(default)]
    pub profile: Option<ProfileKind>,
    /// `z,rho` CSV file, used instead of `profile`.
    #[serde(default)]
    pub profile_file: Option<PathBuf>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "one")]
    pub depth: f64,
    #[serde(default = "one")]
    pub gravity: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default)]
    pub horizontal: Option<HorizontalConfig>,
    #[serde(default)]
    pub mixing: MixingConfig,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub sharp_limit: SharpLimitConfig,
    /// Output directory when `--out` is not given.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizontalConfig {
    pub nx: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    /// Wavenumbers at which coupled mass matrices are assembled and their
    /// condition numbers reported.
    #[serde(default)]
    pub wavenumbers: Vec<f64>,
}

/// Where a simulation takes its mode speeds from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSource {
    /// `c_n = N H/(nπ)` from `buoyancy` and `depth`.
    Explicit,
    /// Eigen-solve of the configured profile.
    Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "default_every")]
    pub snapshot_every: usize,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub mu: f64,
    /// Constant buoyancy frequency for explicit modes and the nonlinear system.
    #[serde(default)]
    pub buoyancy: Option<f64>,
    #[serde(default = "default_source")]
    pub modes_from: ModeSource,
    #[serde(default)]
    pub initial: InitialData,
    /// Also write reconstructed `z × x` fields with each linear snapshot.
    #[serde(default)]
    pub snapshot_fields: bool,
}

/// `V_n(x)` and `ρ_n(x)` built from cosine components plus optional seeded
/// random smooth noise.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default)]
    pub components: Vec<Component>,
    #[serde(default)]
    pub random: Option<RandomData>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    V,
    Rho,
}

/// `amplitude · cos(2π j x / L + phase)` added to one field of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub mode: usize,
    pub field: Field,
    pub wavenumber_index: usize,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomData {
    pub seed: u64,
    pub amplitude: f64,
    pub max_wavenumber_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpLimitConfig {
    #[serde(default = "default_rho_plus")]
    pub rho_plus: f64,
    #[serde(default = "one")]
    pub rho_minus: f64,
    #[serde(default = "default_z0")]
    pub z0: f64,
    #[serde(default = "one")]
    pub g: f64,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_sharp_grid")]
    pub grid_size: usize,
    /// Rows kept in the shape dump.
    #[serde(default = "default_shape_rows")]
    pub shape_rows: usize,
}

impl Default for SharpLimitConfig {
    fn default() -> Self {
        SharpLimitConfig {
            rho_plus: default_rho_plus(),
            rho_minus: 1.0,
            z0: default_z0(),
            g: 1.0,
            deltas: default_deltas(),
            grid_size: default_sharp_grid(),
            shape_rows: default_shape_rows(),
        }
    }
}

fn default_variant() -> Variant {
    Variant::Full
}
fn default_grid_size() -> usize {
    1025
}
fn one() -> f64 {
    1.0
}
fn default_modes() -> usize {
    8
}
fn default_every() -> usize {
    100
}
fn default_source() -> ModeSource {
    ModeSource::Profile
}
fn default_rho_plus() -> f64 {
    2.0
}
fn default_z0() -> f64 {
    -1.0 / 3.0
}
fn default_deltas() -> Vec<f64> {
    vec![0.04, 0.02, 0.01, 0.005]
}
fn default_sharp_grid() -> usize {
    65537
}
fn default_shape_rows() -> usize {
    1025
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Resolves the profile source; file paths are taken relative to `base`.
    pub fn profile_kind(&self, base: &Path) -> Result<ProfileKind> {
        match (&self.profile, &self.profile_file) {
            (Some(_), Some(_)) => Err(Error::Config("give either `profile` or `profile_file`, not both".into())),
            (Some(kind), None) => Ok(kind.clone()),
            (None, Some(file)) => crate::stratification::read_profile_csv(&base.join(file)),
            (None, None) => Err(Error::Config("no `profile` or `profile_file` given".into())),
        }
    }

    pub fn horizontal(&self) -> Result<HorizontalConfig> {
        self.horizontal
            .ok_or_else(|| Error::Config("missing `horizontal` block (nx, length)".into()))
    }

    pub fn simulation(&self) -> Result<&SimulationConfig> {
        self.simulation
            .as_ref()
            .ok_or_else(|| Error::Config("missing `simulation` block".into()))
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::invalid(format!("mu must lie in (0, 1], got {}", self.mu)));
        }
        Ok(())
    }

    pub fn buoyancy(&self) -> Result<f64> {
        match self.buoyancy {
            Some(n) if n > 0.0 && n.is_finite() => Ok(n),
            Some(n) => Err(Error::invalid(format!("buoyancy must be positive, got {n}"))),
            None => Err(Error::Config("`simulation.buoyancy` is required here".into())),
        }
    }
}
