//! Vertical normal-mode toolkit for continuously stratified fluids.

pub mod cli;
pub mod config;
pub mod error;
pub mod stratification;
pub mod linear_dynamics;
pub mod mixing;
pub mod modal_transform;
pub mod nonlinear_dynamics;
pub mod sharp_limit;
pub mod spectral;
pub mod sturm_liouville;
pub mod tridiagonal;

pub use error::{Error, Result};
