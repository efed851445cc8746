//! Simulation and variational numerics for the one-dimensional symmetric
//! simple exclusion process: Harris-stirring simulation with current and
//! tagged-particle tracking, hydrodynamic speeds, discretised rate
//! functionals with adjoint-based minimisation, closed-form trial bounds and
//! the spectral variational problem behind the small-deviation constants.

pub mod error;
pub mod hydro;
pub mod profiles;
pub mod quad;
pub mod ratefn;
pub mod simulator;
pub mod stats;
pub mod trialbounds;
pub mod varprob;

pub use error::{Error, Result};
