//! Adiabatic gauge potentials, curvature and Hannay angles for
//! one-degree-of-freedom integrable Hamiltonian families.

pub mod actionangle;
pub mod agp;
pub mod dynamics;
pub mod error;
pub mod family;
pub mod fit;
pub mod fourier;
pub mod holonomy;
pub mod ode;
pub mod par;
pub mod quad;

pub use error::{Error, Result};
