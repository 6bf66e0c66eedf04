//! Implicit entropy-variable Galerkin scheme for two-species reaction
//! cross-diffusion systems with Neumann boundary conditions, together with the
//! estimates it is expected to satisfy.

pub mod cli;
pub mod coefficients;
pub mod config;
pub mod diagnostics;
pub mod duality;
pub mod entropy;
pub mod error;
pub mod output;
pub mod quadrature;
pub mod spatial;
pub mod stepper;
pub mod study;

pub use error::{Error, Result};
