//! Numerical laboratory for the cubic Gross-Pitaevskii hierarchy on the torus `T^3`.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: truncated Fourier fields, Littlewood-Paley projections, Sobolev norms;
//! * [`nls`]: the free propagator and the Galerkin-truncated cubic NLS flow;
//! * [`density`]: dense and structured density matrices and their norms;
//! * [`collision`]: the collision operators `B_{j,k+1}`;
//! * [`hierarchy`]: residual checks for candidate hierarchy solutions;
//! * [`boardgame`]: collision maps, upper-echelon classes, tree forests and the Duhamel integrand;
//! * [`probe`]: Monte-Carlo probes of the dispersive estimates;
//! * [`nbody`]: exact few-body dynamics, marginals and BBGKY residuals.

pub mod boardgame;
pub mod collision;
pub mod density;
pub mod error;
pub mod hierarchy;
pub mod linalg;
pub mod nbody;
pub mod nls;
pub mod probe;
pub mod quadrature;
pub mod spectral;

#[cfg(test)]
mod proptests;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
