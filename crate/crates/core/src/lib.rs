//! Numerical laboratory for a pilot-wave reading of the Klein-Gordon
//! equation: lattice fields and calculus, a gauged Klein-Gordon solver,
//! Madelung decomposition, the hidden phase that puts particle velocities
//! on the mass shell, a Crank-Nicolson Schrodinger reference with its
//! fluid identities, trajectory integration, and pointwise kinematic
//! identities for analytic flows.

pub mod calculus;
pub mod error;
pub mod field;
pub mod grid;
pub mod hidden_phase;
pub mod kg;
pub mod kinematics;
pub mod madelung;
pub mod norms;
pub mod packets;
pub mod params;
pub mod potentials;
pub mod schrodinger;
pub mod trajectories;

pub use error::{LabError, Result};
pub use field::{ComplexField, FourVectorField, ScalarField, Variance};
pub use grid::SpacetimeGrid;
pub use params::PhysParams;
pub use potentials::Potentials;
