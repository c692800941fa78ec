//! Method-of-lines simulator for coupled 1-D reaction-diffusion systems.
//!
//! Second-order central differences in space, first-order IMEX Euler in
//! time. Diffusion and linear coupling are implicit; reactions and inputs
//! are explicit.

mod grid;
mod input;
mod sim;
mod system;

pub use grid::{
    dirichlet_eigenvalues, h10_squared, inner, laplacian, laplacian_matrix, neumann_eigenvalues, norm, Boundary,
    Grid1D, NormKind, ThomasFactor, Tridiag,
};
pub use input::{ChannelSignal, ClosureSignal, InputSignal};
pub use sim::{
    default_dt, simulate, simulate_from, spectral_abscissa, spectrum, step, write_norms_csv, write_trajectory_csv,
    SimOptions, Stepper, Trajectory, DEFAULT_M_MAX,
};
pub use system::{Field, InputTerm, Model, ScalarMap, SystemSpec, Term};
