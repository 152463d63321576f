//! Numerical core for the Hilbert expansion of the two-species
//! Vlasov-Maxwell-Boltzmann system around a global Maxwellian.

pub mod error;
pub mod quad;
pub mod special;
pub mod velocity;

pub use error::{Error, Result};
pub mod collision;
pub mod kernels;
pub mod burnett;
pub mod torus;
pub mod fluid;
pub mod corrector;
pub mod expansion;
