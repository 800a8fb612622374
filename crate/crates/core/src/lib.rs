//! Numerical laboratory for the 2D/3D compressible, non-isentropic,
//! heat-conduction-free Navier-Stokes system on periodic domains.
//!
//! The library evolves vacuum-capable initial data (density, momentum,
//! pressure) with a Fourier pseudo-spectral discretization and an explicit
//! SSP-RK3 integrator, and continuously evaluates the functionals, algebraic
//! identities, and inequality monitors that control continuation of strong
//! solutions: conserved energy, effective viscous flux, weighted kinetic
//! energies, the logarithmic gradient estimate, the Lame decomposition of the
//! velocity, and the particle-path pressure formula. A run terminates with a
//! verdict (`completed`, `suspected_blowup`, `dt_collapse`, or
//! `nonfinite_abort`) plus the full history of the concentration indicator
//! `sup|rho| + sup|theta|`.

pub mod dense;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod estimates;
pub mod fields;
pub mod lagrangian;
pub mod lame;
pub mod state;

pub use error::CoreError;
pub use fields::{GridSpec, ScalarField, VectorField, Vorticity};
pub use state::{PhysParams, Scenario, State};
