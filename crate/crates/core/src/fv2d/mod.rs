//! Periodic 2-D finite-volume kernel and the monotone Euler–Maruyama maps
//! built from it.

mod flux;
mod grid;
mod initial;
mod io;
mod maps;
mod poisson;
mod recon;
mod velocity;

pub use flux::{
    edge_flux_integral, evolve_flux_form, godunov_burgers_flux, llf_em_flux, llf_em_flux_dt,
    upwind_cgrid_flux, Dir, EdgeFluxes,
};
pub use grid::{CellField, Grid2D, Stencil};
pub use initial::{leveque_initial, leveque_value, square_initial, square_value};
pub use io::{read_fld, write_fld, write_pgm};
pub use maps::{
    build_em_map, edge_states, Advection, BuiltMap, BurgersConstNoise, EulerSalt, FvProblem,
    GodunovBurgers,
};
pub use poisson::{spectral_poisson, PoissonSolver};
pub use recon::{limit_lmp, reconstruct, CellEdges, EdgeStates, GAUSS_OFFSET};
pub use velocity::{
    cellular_noise, cgrid_velocities, deformational_noise, solid_body_rotation, VelocityFields,
};
