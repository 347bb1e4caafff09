//! Exact few-body dynamics on the truncated lattice.

pub mod bbgky;
pub mod chaos;
pub mod hamiltonian;
pub mod potential;
pub mod state;

pub use bbgky::{bbgky_residual, BbgkyResidual, BbgkySetup};
pub use chaos::{
    chaos_diagnostic, cutoff_initial_data, cutoff_sweep, write_chaos_csv, ChaosConfig, ChaosRow, CutoffResult,
    CutoffSweepRow, MomentCheck,
};
pub use hamiltonian::{nbody_evolve, HamiltonianHandle, Method, PairStencil, DENSE_LIMIT};
pub use potential::{build_potential, Profile, ScaledPotential};
pub use state::{marginal, state_dim, NBodyState, KRYLOV_LIMIT};
