use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("density profile is not stably stratified: rho[{index}] = {upper} exceeds rho[{}] = {lower}", index - 1)]
    StratificationUnstable { index: usize, lower: f64, upper: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("non-positive buoyancy frequency: N^2 = {value} at z = {z}")]
    NonPositiveBuoyancy { z: f64, value: f64 },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("grid mismatch: {0}")]
    Grid(String),

    #[error("vertical operator is singular: |rho'_eq| = {value} at z = {z}")]
    OperatorSingular { z: f64, value: f64 },

    #[error("unstable jump: rho_plus = {rho_plus} must exceed rho_minus = {rho_minus} > 0")]
    UnstableJump { rho_plus: f64, rho_minus: f64 },

    #[error("coupled mass matrix is not positive definite at k = {k}")]
    MassMatrixDegenerate { k: f64 },

    #[error("time step failed: {0}")]
    StepFailure(String),

    #[error("blowup detected at t = {time}")]
    BlowupDetected { time: f64 },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    /// Process exit code for the command-line tool: 2 for input errors,
    /// 3 for resolution/parameter errors, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse { .. } | Error::Config(_) | Error::Grid(_) => 2,
            Error::InvalidParams(_)
            | Error::Resolution(_)
            | Error::StratificationUnstable { .. }
            | Error::UnstableJump { .. }
            | Error::NonPositiveBuoyancy { .. }
            | Error::OperatorSingular { .. } => 3,
            Error::EigenFailure(_)
            | Error::MassMatrixDegenerate { .. }
            | Error::StepFailure(_)
            | Error::BlowupDetected { .. } => 4,
        }
    }
}
