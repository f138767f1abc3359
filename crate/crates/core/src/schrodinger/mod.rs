//! Nonrelativistic reference: a Crank-Nicolson Schrodinger solver, the
//! Madelung-fluid identities of the low-speed limit, and the comparison
//! against Klein-Gordon runs with the rest-energy phase removed.

mod compare;
mod fluid;
mod solver;

pub use compare::{dropped_phi_term, low_speed_compare, LowSpeedReport, REPORT_DENSITY_FLOOR};
pub use fluid::{
    corrected_flow, fluid_residuals, fluid_state, mean_velocity, newton_lorentz_residual, solve_lowspeed_phi,
    solve_lowspeed_phi_with, sourced_continuity_residual, u_field, FluidResiduals, FluidState,
};
pub use solver::{
    evolve_schrodinger, evolve_schrodinger_with, ground_state, solve_cyclic_tridiagonal, GroundState,
    SchrodingerOptions, SchrodingerSolution, KINETIC_RATIO_WARNING,
};
