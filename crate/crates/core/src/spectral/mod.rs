//! Truncated Fourier representation of functions on the torus `[0, 2pi]^3`.

pub mod field;
pub mod grid;
pub mod io;
pub mod lattice;
pub mod littlewood_paley;
pub mod random;

pub use field::{Direction, GridValues, TorusField, TORUS_VOLUME};
pub use lattice::{bracket, make_lattice, norm_sq, ModeLattice, ORDERING_VERSION};
pub use littlewood_paley::{bump, dyadic_multiplier, lp_project};
