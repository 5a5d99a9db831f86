//! Delay-equation reductions of the two-strip equatorial ocean model.
//!
//! The crate is organised around the chain that turns the two-strip
//! thermocline/SST system into scalar delay equations and back-checks it:
//!
//! - [`params`]: physical constants, the nondimensional scaling chain and the
//!   scaled delay-model coefficients.
//! - [`linmz`]: memory-integral reduction of finite linear block systems.
//! - [`pde`]: characteristic-based solver for the two-strip system.
//! - [`kernel`]: memory kernel of the linear reduction, including wave
//!   reflections, and its collapse to discrete delays.
//! - [`pod`]: pseudo-orthogonal dynamics of the nonlinear model, its closed
//!   form, noise term and finite-difference memory kernel.
//! - [`dde`]: method-of-steps integrator with dense output and the scalar
//!   delay models.
//! - [`bif`]: equilibria, characteristic roots, Hopf curves, oscillation
//!   boundaries and period sweeps.

pub mod bif;
pub mod dde;
mod error;
pub mod kernel;
pub mod linmz;
pub mod numeric;
pub mod params;
pub mod pde;
pub mod pod;

pub use error::{Error, Result};
pub use params::{PhysicalParams, ScaledParams};
