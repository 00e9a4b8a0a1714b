//! Nonadiabatic population dynamics of spin-boson models by quasiclassical
//! trajectories (Ehrenfest and spin mapping), memory-kernel construction for
//! the generalized quantum master equation, and long-time equilibrium
//! analysis by direct dynamics, stationary kernel integrals and ergodic
//! phase-space averages.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod gqme;
pub mod kernels;
pub mod model;
pub mod pipeline;
pub mod quad;
pub mod sampling;
pub mod tensor;

pub use error::Error;
